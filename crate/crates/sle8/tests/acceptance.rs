//! End-to-end acceptance run: one verdict line per criterion, nonzero exit
//! status if any criterion fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sle8::coulomb::{self, Target};
use sle8::linkpat::{self, compatible, meander_entry, LinkPattern};
use sle8::loewner::{self, SimParams};
use sle8::quad::Config;
use sle8::scmap::{self, SlitMap};
use sle8::ust::{self, estimate_observable, solve_observable, LatticePolygon, RectSpec, WiredGraph};
use sle8::verify::{self, CheckReport, Suite};

/// Outcome of one criterion: verdict, one-line summary, extra detail lines.
struct Outcome {
    pass: bool,
    summary: String,
    detail: Vec<String>,
}

impl Outcome {
    fn new(pass: bool, summary: impl Into<String>) -> Self {
        Self { pass, summary: summary.into(), detail: Vec::new() }
    }

    fn with_detail(mut self, detail: Vec<String>) -> Self {
        self.detail = detail;
        self
    }
}

fn configs(n: usize, count: usize, seed: u64) -> Vec<Config> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| verify::random_config(n, &mut rng)).collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn failures(reports: &[CheckReport]) -> Vec<String> {
    reports
        .iter()
        .filter(|r| !r.pass)
        .map(|r| format!("{}: measured {:.6e}, target {:.6e} {}", r.id, r.measured, r.target, r.detail))
        .collect()
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn c01_closed_form_one() -> Outcome {
    let t = Instant::now();
    let v = coulomb::f_det(&LinkPattern::rainbow(1), &Config::new(vec![0.0, 1.0]).unwrap()).unwrap().value;
    let e = rel(v, PI);
    let dt = t.elapsed();
    Outcome::new(e <= 1e-10 && dt < Duration::from_secs(1), format!("F_1-2(0,1) rel. error {e:.2e}, {:.3}s", secs(dt)))
}

fn c02_closed_form_two() -> Outcome {
    let t = Instant::now();
    let mut reports = Vec::new();
    for x in configs(2, 10, 2) {
        reports.extend(verify::closed_form_two(&x).unwrap());
    }
    let worst = reports.iter().map(|r| rel(r.measured, r.target)).fold(0.0, f64::max);
    let dt = t.elapsed();
    let pass = worst <= 1e-8 && dt < Duration::from_secs(5);
    Outcome::new(pass, format!("20 values, worst rel. error {worst:.2e}, {:.2}s", secs(dt))).with_detail(failures(&reports))
}

fn c03_routes() -> Outcome {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for n in 2..=4 {
        for x in configs(n, 20, 30 + n as u64) {
            for b in linkpat::patterns(n).unwrap() {
                let a = coulomb::f_det(b, &x).unwrap().value;
                let s = coulomb::f_simplex(b, &x).unwrap().value;
                worst = worst.max(rel(s, a));
                cases += 1;
            }
        }
    }
    let dt = t.elapsed();
    Outcome::new(worst <= 1e-7 && dt < Duration::from_secs(120), format!("{cases} cases, worst |F_det - F_simplex|/F {worst:.2e}, {:.1}s", secs(dt)))
}

fn c04_positivity() -> Outcome {
    let mut min_f = f64::INFINITY;
    let mut min_z = f64::INFINITY;
    let mut phase: f64 = 0.0;
    for n in 2..=4 {
        for x in configs(n, 20, 30 + n as u64) {
            let fs = coulomb::f_det_all(&x).unwrap();
            for (f, z) in fs.iter().zip(coulomb::z_all(&x).unwrap()) {
                min_f = min_f.min(f.value);
                min_z = min_z.min(z.value);
                phase = phase.max(f.im_residue / f.value.abs());
            }
        }
    }
    let pass = min_f > 0.0 && min_z > 0.0 && phase <= 1e-8;
    Outcome::new(pass, format!("min F {min_f:.3e}, min Z {min_z:.3e}, max |Im|/|Re| {phase:.2e}"))
}

fn suite(s: Suite, seeds: &[u64]) -> Vec<CheckReport> {
    let mut out = Vec::new();
    for n in 1..=3 {
        for &seed in seeds {
            out.extend(verify::run_suite(s, n, seed).unwrap());
        }
    }
    out
}

fn c05_mobius() -> Outcome {
    let reports = suite(Suite::Mobius, &[11, 12, 13]);
    let worst = reports.iter().map(|r| r.measured).fold(0.0, f64::max);
    let bad: Vec<String> = reports.iter().filter(|r| !(r.measured <= 1e-6)).map(|r| format!("{}: {:.3e}", r.id, r.measured)).collect();
    Outcome::new(bad.is_empty(), format!("{} checks, worst defect {worst:.2e}", reports.len())).with_detail(bad)
}

fn c06_pde() -> Outcome {
    let reports = suite(Suite::Pde, &[11, 12, 13]);
    let worst = reports.iter().map(|r| r.measured).fold(0.0, f64::max);
    let bad: Vec<String> = reports.iter().filter(|r| !(r.measured <= 1e-4)).map(|r| format!("{}: {:.3e}", r.id, r.measured)).collect();
    Outcome::new(bad.is_empty(), format!("{} residuals, worst {worst:.2e}", reports.len())).with_detail(bad)
}

fn c07_fusion() -> Outcome {
    let reports = suite(Suite::Asy, &[11]);
    let tally = |prefix: &str| {
        let sel: Vec<&CheckReport> = reports.iter().filter(|r| r.id.starts_with(prefix)).collect();
        (sel.iter().filter(|r| r.pass).count(), sel.len())
    };
    let (f_ok, f_n) = (tally("asy-pi/F").0 + tally("asy-log/F").0, tally("asy-pi/F").1 + tally("asy-log/F").1);
    let (z_ok, z_n) = (tally("asy-pi/Z").0 + tally("asy-log/Z").0, tally("asy-pi/Z").1 + tally("asy-log/Z").1);
    let (fib_ok, fib_n) = tally("asy-fibre");
    let literal: Vec<CheckReport> = reports.iter().filter(|r| !r.id.starts_with("asy-fibre")).cloned().collect();
    let pass = literal.iter().all(|r| r.pass);
    Outcome::new(
        pass,
        format!("F channels {f_ok}/{f_n}, Z channels {z_ok}/{z_n}, Z generic channel summed over tying fibres {fib_ok}/{fib_n}"),
    )
    .with_detail(failures(&reports))
}

fn c08_lim() -> Outcome {
    let reports = suite(Suite::Lim, &[11]);
    let diag = reports.iter().filter(|r| r.relative).map(|r| rel(r.measured, r.target)).fold(0.0, f64::max);
    let off = reports.iter().filter(|r| !r.relative).map(|r| r.measured).fold(0.0, f64::max);
    let pass = reports.iter().all(|r| r.pass);
    Outcome::new(pass, format!("{} entries, diagonal worst rel. {diag:.2e}, off-diagonal max |.| {off:.2e}", reports.len()))
        .with_detail(failures(&reports))
}

fn c09_matrices() -> Outcome {
    let mut reports = Vec::new();
    for n in 1..=4 {
        for x in configs(n, 5, 90 + n as u64) {
            for b in linkpat::patterns(n).unwrap() {
                reports.push(verify::matrix_identity(b, &x).unwrap());
            }
        }
        for b in linkpat::patterns(n).unwrap() {
            reports.push(verify::det_check(b));
        }
    }
    let worst = reports.iter().filter(|r| r.id.starts_with("matrix")).map(|r| r.measured).fold(0.0, f64::max);
    let pass = reports.iter().all(|r| r.pass);
    Outcome::new(pass, format!("{} checks, worst |MP - P°| {worst:.2e}, det M = 2^N exact", reports.len())).with_detail(failures(&reports))
}

fn c10_slit_map() -> Outcome {
    let mut closure: f64 = 0.0;
    let mut drift: f64 = 0.0;
    let mut errors = Vec::new();
    let mut cases = 0;
    for x in configs(3, 10, 100) {
        for b in linkpat::patterns(3).unwrap().iter().filter(|b| !b.contains(1, 6)) {
            cases += 1;
            match scmap::solve_q(b, &x).and_then(SlitMap::new).and_then(|m| m.closure_residuals()) {
                Ok(r) => closure = r.into_iter().fold(closure, f64::max),
                Err(e) => errors.push(format!("{b}: {e}")),
            }
            let d = verify::drift_identity(b, &x).unwrap();
            drift = drift.max(rel(d.measured, d.target));
        }
    }
    let pass = errors.is_empty() && closure < 1e-8 && drift <= 1e-5;
    Outcome::new(pass, format!("{cases} maps, worst closure {closure:.2e}, roots bracketed, worst drift rel. {drift:.2e}")).with_detail(errors)
}

fn c11_meanders() -> Outcome {
    let m2 = linkpat::meander_matrix(2).unwrap().to_f64();
    let anti = m2 == vec![vec![0.0, 1.0], vec![1.0, 0.0]];
    let fig: LinkPattern = "1-2,3-8,4-7,5-6".parse().unwrap();
    let k = compatible(&fig).len();
    let mut worst: f64 = 0.0;
    for n in 1..=4 {
        for x in configs(n, 5, 110 + n as u64) {
            let fs = coulomb::f_det_all(&x).unwrap();
            let zs = coulomb::z_all(&x).unwrap();
            let pats = linkpat::patterns(n).unwrap();
            for (b, f) in pats.iter().zip(&fs) {
                let s: f64 = pats.iter().zip(&zs).filter(|(a, _)| meander_entry(a, b)).map(|(_, z)| z.value).sum();
                worst = worst.max(rel(s, f.value));
            }
        }
    }
    let pass = anti && k == 4 && worst <= 1e-7;
    Outcome::new(pass, format!("N=2 anti-diagonal: {anti}, compatible with {fig}: {k}, worst sum-rule rel. {worst:.2e}"))
}

fn criterion_marks() -> RectSpec {
    RectSpec { width: 1.0, height: 1.0, marks: vec![(0.2, 1.0), (0.0, 0.5), (0.3, 0.0), (0.7, 0.0), (1.0, 0.5), (0.8, 1.0)] }
}

fn c12_monte_carlo() -> Outcome {
    let beta = LinkPattern::rainbow(3);
    let mut lines = Vec::new();
    let mut gaps = Vec::new();
    let mut within = true;
    let mut first_time = Duration::ZERO;
    for (delta, label) in [(0.02, "50x50"), (0.01, "100x100")] {
        let poly = LatticePolygon::build(&criterion_marks(), delta).unwrap();
        let x = poly.continuum_points().unwrap();
        let g = WiredGraph::new(poly, beta.clone()).unwrap();
        let t = Instant::now();
        let counts = ust::mc_crossing(&g, 100_000, 7, 4).unwrap();
        let dt = t.elapsed();
        if gaps.is_empty() {
            first_time = dt;
        }
        let mut gap: f64 = 0.0;
        for (a, p) in coulomb::crossing_probs(&beta, &x).unwrap() {
            let f = counts.frequency(&a);
            let sigma = (p * (1.0 - p) / counts.samples as f64).sqrt();
            let ok = (f - p).abs() <= 3.0 * sigma;
            within &= ok;
            gap = gap.max((f - p).abs());
            lines.push(format!("{label} {a}: freq {f:.5} exact {p:.5} sigma {sigma:.2e} {}", if ok { "ok" } else { "outside 3 sigma" }));
        }
        lines.push(format!("{label}: {:.1}s", secs(dt)));
        gaps.push(gap);
    }
    let not_increasing = gaps[1] <= gaps[0];
    let pass = within && not_increasing && first_time <= Duration::from_secs(300);
    Outcome::new(pass, format!("gap {:.2e} (50x50) -> {:.2e} (100x100), 50x50 in {:.1}s", gaps[0], gaps[1], secs(first_time))).with_detail(lines)
}

fn c13_deterministic() -> Outcome {
    let beta = LinkPattern::all_simple(3);
    let only = compatible(&beta);
    let poly = LatticePolygon::build(&criterion_marks(), 0.02).unwrap();
    let g = WiredGraph::new(poly, beta.clone()).unwrap();
    let counts = ust::mc_crossing(&g, 10_000, 13, 4).unwrap();
    let hits = only.first().map(|a| counts.count(a)).unwrap_or(0);
    let pass = only.len() == 1 && hits == 10_000;
    Outcome::new(pass, format!("beta {beta}: {hits}/10000 samples give {}", only.first().map(|a| a.to_string()).unwrap_or_default()))
}

fn observable_gap(beta: &LinkPattern, delta: f64) -> (f64, f64, bool) {
    let poly = LatticePolygon::build(&criterion_marks(), delta).unwrap();
    let x = poly.continuum_points().unwrap();
    let map = poly.rect_map();
    let (w, h) = (poly.w as f64, poly.h as f64);
    let g = WiredGraph::new(poly, beta.clone()).unwrap();
    let field = solve_observable(&g).unwrap();
    let in_range = field.values.iter().all(|&u| (0.0..=1.0).contains(&u));
    let sm = SlitMap::new(scmap::solve_q(beta, &x).unwrap()).unwrap();
    let mut sup: f64 = 0.0;
    for a in 1..10 {
        for b in 1..10 {
            let (px, py) = (a as f64 / 10.0, b as f64 / 10.0);
            let z = map.to_half_plane(px * w, py * h);
            let phi = sm.eval(Complex64::new(z.re, z.im)).unwrap();
            sup = sup.max((field.interpolate(px * w, py * h) - phi.re).abs());
        }
    }
    (sup, field.residual, in_range)
}

fn c14_observable() -> Outcome {
    let beta: LinkPattern = "1-4,2-3,5-6".parse().unwrap();
    let (sup1, res1, range1) = observable_gap(&beta, 0.02);
    let (sup2, res2, range2) = observable_gap(&beta, 0.01);
    let poly = LatticePolygon::build(&criterion_marks(), 0.02).unwrap();
    let w = poly.w;
    let probes: Vec<usize> = [(25, 25), (12, 37), (37, 12), (25, 8), (8, 25)].iter().map(|&(i, j)| j * w + i).collect();
    let g = WiredGraph::new(poly, beta.clone()).unwrap();
    let field = solve_observable(&g).unwrap();
    let est = estimate_observable(&g, &probes, 10_000, 17, 4).unwrap();
    let mut lines = Vec::new();
    let mut within = true;
    for (k, &f) in probes.iter().enumerate() {
        let u = field.values[f];
        let sigma = (u * (1.0 - u) / est.samples as f64).sqrt();
        let ok = (est.frequency(k) - u).abs() <= 3.0 * sigma;
        within &= ok;
        lines.push(format!("face {f}: MC {:.4} solved {u:.4} sigma {sigma:.2e} {}", est.frequency(k), if ok { "ok" } else { "outside 3 sigma" }));
    }
    let pass = res1 < 1e-10 && res2 < 1e-10 && range1 && range2 && sup2 < sup1 && within;
    Outcome::new(pass, format!("residual {:.1e}, sup |u - Re phi| {sup1:.4} (delta 0.02) -> {sup2:.4} (delta 0.01), 5 probes", res1.max(res2)))
        .with_detail(lines)
}

fn c15_loewner() -> Outcome {
    let one = Target::F(LinkPattern::rainbow(1));
    let mut rng = ChaCha8Rng::seed_from_u64(150);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let w: f64 = rng.random_range(-5.0..5.0);
        let v = w + if rng.random_bool(0.5) { 1.0 } else { -1.0 } * rng.random_range(0.05..4.0);
        let (pts, i) = if w < v { (vec![w, v], 1) } else { (vec![v, w], 2) };
        let d = loewner::drift(&one, &Config::new(pts).unwrap(), i).unwrap();
        worst = worst.max(rel(d, 2.0 / (w - v)));
    }
    let x = Config::new(vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
    let beta = LinkPattern::rainbow(3);
    let alpha: LinkPattern = "1-2,3-6,4-5".parse().unwrap();
    let t = Instant::now();
    let s = loewner::martingale_check(&x, 1, &beta, &alpha, 1000, SimParams::new(1e-3, 0.05), 15).unwrap();
    let in_range = s.min_value >= 0.0 && s.max_value <= 1.0;
    let pass = worst <= 1e-8 && s.consistent(3.0) && in_range;
    Outcome::new(
        pass,
        format!(
            "N=1 drift worst rel. {worst:.2e}; mean increment {:.2e} (3 sigma = {:.2e}) over {} paths, {:.1}s",
            s.mean_increment,
            3.0 * s.std_error,
            s.n_paths,
            secs(t.elapsed())
        ),
    )
}

fn main() {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("closed form N=1", c01_closed_form_one),
        ("closed forms N=2", c02_closed_form_two),
        ("route agreement", c03_routes),
        ("positivity and phase", c04_positivity),
        ("Mobius covariance", c05_mobius),
        ("PDE residuals", c06_pde),
        ("fusion asymptotics", c07_fusion),
        ("Lim collocation", c08_lim),
        ("matrix identities", c09_matrices),
        ("slit map", c10_slit_map),
        ("meander facts", c11_meanders),
        ("Monte Carlo vs exact", c12_monte_carlo),
        ("deterministic patterns", c13_deterministic),
        ("discrete observable", c14_observable),
        ("Loewner driving process", c15_loewner),
    ];
    let filter: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let id = k + 1;
        if filter.is_some_and(|f| f != id) {
            continue;
        }
        let t = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default();
            Outcome::new(false, format!("panicked: {msg}"))
        });
        let tag = if out.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:2} {tag} {name}: {} [{:.1}s]", out.summary, secs(t.elapsed()));
        for d in &out.detail {
            println!("    {d}");
        }
        failed += usize::from(!out.pass);
    }
    println!("acceptance: {} failed", failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

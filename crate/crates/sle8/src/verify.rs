//! Executable checks of the analytic identities: PDEs, covariance, fusion
//! asymptotics, the collocation functional, matrix identities and sum rules.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coulomb::{self, f_det, f_simplex, z_all, CoulombError, Plan, Target};
use crate::linkpat::{self, LinkError, LinkPattern};
use crate::quad::{Config, QuadError};
use crate::scmap::{self, ScError};

pub const TOL_ALGEBRAIC: f64 = 1e-8;
pub const TOL_COVARIANCE: f64 = 1e-6;
pub const TOL_PDE: f64 = 1e-4;
pub const TOL_PI_CHANNEL: f64 = 1e-3;
pub const TOL_LOG_CHANNEL: f64 = 0.02;
pub const MIN_R2: f64 = 0.9999;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Coulomb(#[from] CoulombError),
    #[error(transparent)]
    Sc(#[from] ScError),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error("map does not preserve the order of the points")]
    Ordering,
    #[error("wrong channel: link {0}-{1} is {2} the pattern")]
    Channel(usize, usize, &'static str),
    #[error("stencil leaves the configuration space")]
    Stencil,
}

/// Outcome of one check. `pass` holds when `|measured - target| <= tolerance`,
/// scaled by `|target|` when `relative` is set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub id: String,
    pub inputs: String,
    pub measured: f64,
    pub target: f64,
    pub tolerance: f64,
    pub relative: bool,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl CheckReport {
    pub fn new(id: impl Into<String>, inputs: impl Into<String>, measured: f64, target: f64, tolerance: f64) -> Self {
        let relative = target != 0.0;
        let scale = if relative { target.abs() } else { 1.0 };
        let pass = (measured - target).abs() <= tolerance * scale;
        Self { id: id.into(), inputs: inputs.into(), measured, target, tolerance, relative, pass, detail: String::new() }
    }

    /// A check whose measured quantity is already a defect compared against zero.
    pub fn defect(id: impl Into<String>, inputs: impl Into<String>, defect: f64, tolerance: f64) -> Self {
        Self::new(id, inputs, defect, 0.0, tolerance)
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    pub fn fail_if(mut self, cond: bool, why: &str) -> Self {
        if cond {
            self.pass = false;
            if !self.detail.is_empty() {
                self.detail.push_str("; ");
            }
            self.detail.push_str(why);
        }
        self
    }

    /// Error in units of the tolerance.
    pub fn error_ratio(&self) -> f64 {
        let scale = if self.relative { self.target.abs() } else { 1.0 };
        (self.measured - self.target).abs() / (self.tolerance * scale)
    }
}

fn label(target: &Target) -> String {
    match target {
        Target::F(b) => format!("F[{b}]"),
        Target::Z(a) => format!("Z[{a}]"),
    }
}

fn fmt_x(x: &[f64]) -> String {
    let parts: Vec<String> = x.iter().map(|v| format!("{v:.6}")).collect();
    parts.join(",")
}

/// Random ordered configuration with gaps in `[0.3, 1.5)`.
pub fn random_config<R: Rng>(n_links: usize, rng: &mut R) -> Config {
    let mut p = Vec::with_capacity(2 * n_links);
    let mut v = rng.random_range(-1.0..1.0);
    for _ in 0..2 * n_links {
        p.push(v);
        v += rng.random_range(0.3..1.5);
    }
    Config::new(p).expect("increasing by construction")
}

/// `D^(j) F / (|F| / mingap^2)` with finite differences under a frozen plan.
pub fn pde_residual(target: &Target, x: &Config, j: usize) -> Result<CheckReport, VerifyError> {
    let n2 = x.len();
    if j == 0 || j > n2 {
        return Err(VerifyError::Stencil);
    }
    let plan = Plan::new(x)?.refined();
    let eval = |y: &Config| target.eval_with(y, &plan);
    let f = eval(x)?;
    let pts = x.points();
    let first = |i: usize, h: f64| -> Result<f64, VerifyError> {
        let d = |s: f64| -> Result<f64, VerifyError> { Ok(eval(&x.shifted(i, s).map_err(|_| VerifyError::Stencil)?)?) };
        let d1 = (d(h)? - d(-h)?) / (2.0 * h);
        let d2 = (d(0.5 * h)? - d(-0.5 * h)?) / h;
        Ok((4.0 * d2 - d1) / 3.0)
    };
    let second = |i: usize, h: f64| -> Result<f64, VerifyError> {
        let d = |s: f64| -> Result<f64, VerifyError> { Ok(eval(&x.shifted(i, s).map_err(|_| VerifyError::Stencil)?)?) };
        let s1 = (d(h)? - 2.0 * f + d(-h)?) / (h * h);
        let s2 = (d(0.5 * h)? - 2.0 * f + d(-0.5 * h)?) / (0.25 * h * h);
        Ok((4.0 * s2 - s1) / 3.0)
    };
    let mut total = 4.0 * second(j, 2e-3 * x.local_gap(j))?;
    let xj = pts[j - 1];
    for i in 1..=n2 {
        if i == j {
            continue;
        }
        let d = pts[i - 1] - xj;
        total += 2.0 / d * first(i, 1e-3 * x.local_gap(i))? + 0.25 / (d * d) * f;
    }
    let gap = x.min_gap();
    let normalized = total.abs() * gap * gap / f.abs();
    Ok(CheckReport::defect(format!("pde/{}/j{j}", label(target)), fmt_x(pts), normalized, TOL_PDE))
}

/// Möbius maps preserving the upper half-plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum MobiusMap {
    Translation(f64),
    Scaling(f64),
    /// `x -> x / (1 + xi x)`.
    SpecialConformal(f64),
}

impl MobiusMap {
    pub fn apply(&self, x: f64) -> (f64, f64) {
        match *self {
            MobiusMap::Translation(c) => (x + c, 1.0),
            MobiusMap::Scaling(l) => (l * x, l),
            MobiusMap::SpecialConformal(xi) => {
                let d = 1.0 + xi * x;
                (x / d, 1.0 / (d * d))
            }
        }
    }

    fn name(&self) -> String {
        match self {
            MobiusMap::Translation(c) => format!("translation({c})"),
            MobiusMap::Scaling(l) => format!("scaling({l})"),
            MobiusMap::SpecialConformal(xi) => format!("special({xi})"),
        }
    }
}

/// Relative defect of `F(x) = prod phi'(x_i)^{-1/8} F(phi(x))`.
pub fn mobius_check(target: &Target, x: &Config, map: MobiusMap) -> Result<CheckReport, VerifyError> {
    // order is preserved iff no point is sent through infinity
    if let MobiusMap::SpecialConformal(xi) = map {
        if x.points().iter().any(|&p| 1.0 + xi * p <= 0.0) {
            return Err(VerifyError::Ordering);
        }
    }
    let mapped: Vec<(f64, f64)> = x.points().iter().map(|&p| map.apply(p)).collect();
    if mapped.iter().any(|&(_, d)| !(d > 0.0)) {
        return Err(VerifyError::Ordering);
    }
    let y = Config::new(mapped.iter().map(|m| m.0).collect()).map_err(|_| VerifyError::Ordering)?;
    let jac: f64 = mapped.iter().map(|m| m.1.powf(-0.125)).product();
    let lhs = target.eval(x)?;
    let rhs = jac * target.eval(&y)?;
    let tol = match map {
        MobiusMap::Translation(_) => 1e-10,
        MobiusMap::Scaling(_) => TOL_ALGEBRAIC,
        MobiusMap::SpecialConformal(_) => TOL_COVARIANCE,
    };
    Ok(CheckReport::defect(format!("mobius/{}/{}", label(target), map.name()), fmt_x(x.points()), (lhs - rhs).abs() / lhs.abs(), tol))
}

/// Pattern governing the limit of `target` when points `j, j+1` merge, and
/// whether that limit sits in the logarithmic channel.
fn fusion_channel(target: &Target, j: usize) -> Result<(Target, bool), VerifyError> {
    let p = target.pattern();
    let inside = p.contains(j, j + 1);
    Ok(match target {
        Target::F(b) if inside => (Target::F(b.remove(j)?), false),
        Target::F(b) => (Target::F(b.wp_hat(j)?), true),
        Target::Z(a) if inside => (Target::Z(a.remove(j)?), true),
        Target::Z(a) => (Target::Z(a.wp_hat(j)?), false),
    })
}

/// Reduced configuration shifted so the merge point sits at the origin.
fn merge_geometry(y: &[f64], j: usize) -> (Vec<f64>, f64) {
    let left = if j >= 2 { Some(y[j - 2]) } else { None };
    let right = y.get(j - 1).copied();
    let (xi, scale) = match (left, right) {
        (Some(l), Some(r)) => (0.5 * (l + r), 0.5 * (r - l)),
        (Some(l), None) => (l + 1.0, 1.0),
        (None, Some(r)) => (r - 1.0, 1.0),
        (None, None) => (0.0, 1.0),
    };
    (y.iter().map(|v| v - xi).collect(), scale)
}

fn with_pair(y: &[f64], j: usize, eps: f64) -> Result<Config, VerifyError> {
    let mut p = y.to_vec();
    p.insert(j - 1, -0.5 * eps);
    p.insert(j, 0.5 * eps);
    Config::new(p).map_err(|_| VerifyError::Stencil)
}

fn reduced_value(t: &Target, y: &[f64]) -> Result<f64, VerifyError> {
    if y.is_empty() {
        return Ok(1.0);
    }
    Ok(t.eval(&Config::new(y.to_vec())?)?)
}

/// Generic channel: `target / eps^{1/4}` tends to `pi` times the reduced function.
pub fn asy_pi(target: &Target, y: &[f64], j: usize) -> Result<CheckReport, VerifyError> {
    let (reduced, log) = fusion_channel(target, j)?;
    if log {
        return Err(VerifyError::Channel(j, j + 1, "in the logarithmic channel for"));
    }
    let (y0, scale) = merge_geometry(y, j);
    let v = |eps: f64| -> Result<f64, VerifyError> { Ok(target.eval(&with_pair(&y0, j, eps)?)? / eps.powf(0.25)) };
    let eps = 1e-5 * scale;
    let limit = 2.0 * v(0.5 * eps)? - v(eps)?;
    let expect = PI * reduced_value(&reduced, &y0)?;
    Ok(CheckReport::new(format!("asy-pi/{}/j{j}", label(target)), fmt_x(y), limit, expect, TOL_PI_CHANNEL))
}

/// Patterns `alpha'` without the link `{j, j+1}` sharing `wp_hat(alpha', j)`
/// with `alpha`.
pub fn wp_fibre(alpha: &LinkPattern, j: usize) -> Result<Vec<LinkPattern>, VerifyError> {
    let gamma = alpha.wp_hat(j)?;
    let mut out = Vec::new();
    for a in linkpat::patterns(alpha.n())? {
        if !a.contains(j, j + 1) && a.wp_hat(j)? == gamma {
            out.push(a.clone());
        }
    }
    Ok(out)
}

/// Generic channel of `Z` summed over the fibre of `wp_hat(., j)` through
/// `alpha`: the sum of the limits of `Z_alpha' / eps^{1/4}` against
/// `pi Z_{wp_hat(alpha, j)}`.
pub fn asy_pi_fibre(alpha: &LinkPattern, y: &[f64], j: usize) -> Result<CheckReport, VerifyError> {
    if alpha.contains(j, j + 1) {
        return Err(VerifyError::Channel(j, j + 1, "in the logarithmic channel for"));
    }
    let fibre = wp_fibre(alpha, j)?;
    let idx: Vec<usize> = fibre.iter().map(linkpat::pattern_index).collect();
    let (y0, scale) = merge_geometry(y, j);
    let v = |eps: f64| -> Result<f64, VerifyError> {
        let zs = z_all(&with_pair(&y0, j, eps)?)?;
        Ok(idx.iter().map(|&i| zs[i].value).sum::<f64>() / eps.powf(0.25))
    };
    let eps = 1e-5 * scale;
    let limit = 2.0 * v(0.5 * eps)? - v(eps)?;
    let expect = PI * reduced_value(&Target::Z(alpha.wp_hat(j)?), &y0)?;
    let names: Vec<String> = fibre.iter().map(|a| a.to_string()).collect();
    Ok(CheckReport::new(format!("asy-fibre/Z[{alpha}]/j{j}"), fmt_x(y), limit, expect, TOL_PI_CHANNEL)
        .with_detail(format!("fibre={}", names.join(" "))))
}

/// Least-squares line `v = a + b t`; returns `(a, b, r2)`.
pub fn linear_fit(t: &[f64], v: &[f64]) -> (f64, f64, f64) {
    let n = t.len() as f64;
    let mt = t.iter().sum::<f64>() / n;
    let mv = v.iter().sum::<f64>() / n;
    let stt: f64 = t.iter().map(|a| (a - mt).powi(2)).sum();
    let stv: f64 = t.iter().zip(v).map(|(a, b)| (a - mt) * (b - mv)).sum();
    let svv: f64 = v.iter().map(|b| (b - mv).powi(2)).sum();
    let b = stv / stt;
    let a = mv - b * mt;
    let r2 = if svv == 0.0 { 1.0 } else { stv * stv / (stt * svv) };
    (a, b, r2)
}

fn log_ladder(n: usize) -> Vec<f64> {
    (0..n).map(|k| 10f64.powf(-6.0 + 3.0 * k as f64 / (n - 1) as f64)).collect()
}

/// Logarithmic channel: `target / eps^{1/4}` regressed on `|log eps|` over
/// `eps` in `[1e-6, 1e-3]`; the slope tends to the reduced function.
pub fn asy_log(target: &Target, y: &[f64], j: usize) -> Result<CheckReport, VerifyError> {
    let (reduced, log) = fusion_channel(target, j)?;
    if !log {
        return Err(VerifyError::Channel(j, j + 1, "in the generic channel for"));
    }
    let (y0, scale) = merge_geometry(y, j);
    let mut ts = Vec::new();
    let mut vs = Vec::new();
    for r in log_ladder(13) {
        let eps = r * scale;
        ts.push(-eps.ln());
        vs.push(target.eval(&with_pair(&y0, j, eps)?)? / eps.powf(0.25));
    }
    let (_, slope, r2) = linear_fit(&ts, &vs);
    let expect = reduced_value(&reduced, &y0)?;
    Ok(CheckReport::new(format!("asy-log/{}/j{j}", label(target)), fmt_x(y), slope, expect, TOL_LOG_CHANNEL)
        .with_detail(format!("r2={r2:.8}"))
        .fail_if(r2 < MIN_R2, "poor fit"))
}

/// Points for the iterated collapse of `alpha`: link `k` of the allowable
/// ordering sits at relative separation `ratios[k]` inside the gap left by
/// the later links; the last link has separation 1. Returns the points
/// (shifted so the tightest pair is centred at the origin) and the absolute
/// separation of every link.
fn collapse_geometry(order: &[(usize, usize)], ratios: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = order.len();
    let mut pts: Vec<(usize, f64)> = vec![(order[n - 1].0, -0.5), (order[n - 1].1, 0.5)];
    let mut seps = vec![0.0; n];
    let mut centres = vec![0.0; n];
    seps[n - 1] = 1.0;
    for k in (0..n - 1).rev() {
        let (a, b) = order[k];
        let idx = pts.partition_point(|p| p.0 < a);
        let left = idx.checked_sub(1).map(|i| pts[i].1);
        let right = pts.get(idx).map(|p| p.1);
        let (c, gap) = match (left, right) {
            (Some(l), Some(r)) => (0.5 * (l + r), r - l),
            (Some(l), None) => (l + 1.0, 1.0),
            (None, Some(r)) => (r - 1.0, 1.0),
            (None, None) => unreachable!("at least one link is placed"),
        };
        let e = ratios[k] * gap;
        seps[k] = e;
        centres[k] = c;
        pts.insert(idx, (b, c + 0.5 * e));
        pts.insert(idx, (a, c - 0.5 * e));
    }
    let tight = (0..n).min_by(|&a, &b| seps[a].total_cmp(&seps[b])).unwrap_or(0);
    let shift = centres[tight];
    (pts.iter().map(|p| p.1 - shift).collect(), seps)
}

/// Relative imaginary residue tolerated at collapsed configurations, where
/// the period determinant is nearly singular.
const LIM_PHASE_TOL: f64 = 1e-3;

fn collapsed_z(x: &Config) -> Result<Vec<f64>, VerifyError> {
    let f = coulomb::f_all_with(x, &Plan::new(x)?)?;
    if let Some(&(v, im)) = f.iter().find(|(v, im)| !(*im <= LIM_PHASE_TOL * v.abs())) {
        return Err(CoulombError::Phase { ratio: im / v.abs() }.into());
    }
    let minv = linkpat::meander_inverse_f64(x.n_links())?;
    Ok(minv.iter().map(|row| row.iter().zip(&f).map(|(m, (v, _))| m * v).sum()).collect())
}

/// `Lim_alpha(Z_beta)` for every `beta` in [`linkpat::patterns`] order: the
/// first `N-1` links of an allowable ordering of `alpha` are collapsed in
/// the logarithmic normalisation by nested regressions, the last one in the
/// power normalisation at unit separation.
pub fn lim_alpha(alpha: &LinkPattern) -> Result<Vec<f64>, VerifyError> {
    let order = alpha.allowable_ordering();
    let n = order.len();
    let mut ratios = vec![1.0; n];
    fn level(order: &[(usize, usize)], lev: isize, ratios: &mut Vec<f64>) -> Result<Vec<f64>, VerifyError> {
        if lev < 0 {
            let (pts, _) = collapse_geometry(order, ratios);
            return collapsed_z(&Config::new(pts)?);
        }
        let k = lev as usize;
        let mut ts = Vec::new();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for r in log_ladder(7) {
            ratios[k] = r;
            let eps = collapse_geometry(order, ratios).1[k];
            let vals = level(order, lev - 1, ratios)?;
            ts.push(-eps.ln());
            rows.push(vals.iter().map(|v| v / eps.powf(0.25)).collect());
        }
        let m = rows[0].len();
        Ok((0..m)
            .map(|c| {
                let col: Vec<f64> = rows.iter().map(|r| r[c]).collect();
                linear_fit(&ts, &col).1
            })
            .collect())
    }
    level(&order, n as isize - 2, &mut ratios)
}

/// `Lim_alpha(Z_beta)` against `pi` (diagonal, within 2%) or `0` (within `0.05 pi`).
pub fn lim_collocation(alpha: &LinkPattern, beta: &LinkPattern) -> Result<CheckReport, VerifyError> {
    let vals = lim_alpha(alpha)?;
    Ok(lim_report(alpha, beta, vals[linkpat::pattern_index(beta)]))
}

pub fn lim_report(alpha: &LinkPattern, beta: &LinkPattern, value: f64) -> CheckReport {
    let id = format!("lim/{alpha}/{beta}");
    if alpha == beta {
        CheckReport::new(id, "", value, PI, 0.02)
    } else {
        CheckReport::defect(id, "", value.abs(), 0.05 * PI)
    }
}

/// `|sum_alpha M_{alpha,beta} Z_alpha / F_beta - 1|`.
pub fn sum_rule(beta: &LinkPattern, x: &Config) -> Result<CheckReport, VerifyError> {
    let total: f64 = coulomb::crossing_probs(beta, x)?.iter().map(|(_, p)| p).sum();
    Ok(CheckReport::defect(format!("sum/{beta}"), fmt_x(x.points()), (total - 1.0).abs(), TOL_ALGEBRAIC))
}

/// `max |M P - P°| / max |P°|`.
pub fn matrix_identity(beta: &LinkPattern, x: &Config) -> Result<CheckReport, VerifyError> {
    let m = scmap::loop_matrix_m(beta);
    let p = scmap::period_matrix_p(beta, x)?;
    let po = scmap::loop_period_matrix(beta, x)?;
    let diff = (&m * &p - &po).iter().map(|c| c.norm()).fold(0.0, f64::max);
    let scale = po.iter().map(|c| c.norm()).fold(0.0, f64::max);
    Ok(CheckReport::defect(format!("matrix/{beta}"), fmt_x(x.points()), diff / scale, TOL_ALGEBRAIC))
}

/// `det M_beta = 2^N` over the Gaussian integers.
pub fn det_check(beta: &LinkPattern) -> CheckReport {
    let (re, im) = scmap::loop_matrix_det(beta);
    let expect = 1i64 << beta.n();
    CheckReport::new(format!("det/{beta}"), "", re as f64, expect as f64, 0.0).fail_if(im != 0, "imaginary part")
}

/// `d_1 log F` against the slit-map expression.
pub fn drift_identity(beta: &LinkPattern, x: &Config) -> Result<CheckReport, VerifyError> {
    let from_map = scmap::drift_from_map(beta, x)?;
    let direct = coulomb::dlog_f(beta, x, 1)?;
    Ok(CheckReport::new(format!("drift/{beta}"), fmt_x(x.points()), from_map, direct, 1e-5))
}

/// Relative difference of the determinant and simplex routes.
pub fn route_agreement(beta: &LinkPattern, x: &Config) -> Result<CheckReport, VerifyError> {
    let a = f_det(beta, x)?.value;
    let b = f_simplex(beta, x)?.value;
    Ok(CheckReport::new(format!("routes/{beta}"), fmt_x(x.points()), b, a, 1e-7))
}

/// Smallest `F`, `Z` and largest phase ratio over all patterns at `x`.
pub fn positivity(x: &Config) -> Result<Vec<CheckReport>, VerifyError> {
    let fs = coulomb::f_det_all(x)?;
    let zs = z_all(x)?;
    let min_f = fs.iter().map(|v| v.value).fold(f64::INFINITY, f64::min);
    let min_z = zs.iter().map(|v| v.value).fold(f64::INFINITY, f64::min);
    let phase = fs.iter().map(|v| v.im_residue / v.value.abs()).fold(0.0, f64::max);
    let inputs = fmt_x(x.points());
    Ok(vec![
        CheckReport::defect("pos/F", inputs.clone(), 0.0, 0.0).with_detail(format!("min={min_f:e}")).fail_if(!(min_f > 0.0), "non-positive F"),
        CheckReport::defect("pos/Z", inputs.clone(), 0.0, 0.0).with_detail(format!("min={min_z:e}")).fail_if(!(min_z > 0.0), "non-positive Z"),
        CheckReport::defect("phase/F", inputs, phase, TOL_ALGEBRAIC),
    ])
}

/// `F_{1-2}(0, 1) = pi`.
pub fn closed_form_one() -> Result<CheckReport, VerifyError> {
    let v = f_det(&LinkPattern::rainbow(1), &Config::new(vec![0.0, 1.0])?)?.value;
    Ok(CheckReport::new("closed/N1", "0,1", v, PI, 1e-10))
}

/// Both `N = 2` functions against their hypergeometric forms.
pub fn closed_form_two(x: &Config) -> Result<Vec<CheckReport>, VerifyError> {
    let p = x.points();
    let (x1, x2, x3, x4) = (p[0], p[1], p[2], p[3]);
    let z = (x2 - x1) * (x4 - x3) / ((x3 - x1) * (x4 - x2));
    let hyp = crate::special::hyp2f1_half;
    let simple = PI * PI * ((x4 - x1) * (x3 - x2) * z).powf(0.25) * hyp(z);
    let nested = PI * PI * ((x2 - x1) * (x4 - x3) * (1.0 - z)).powf(0.25) * hyp(1.0 - z);
    let inputs = fmt_x(p);
    Ok(vec![
        CheckReport::new("closed/N2/1-4,2-3", inputs.clone(), f_det(&"1-4,2-3".parse()?, x)?.value, nested, TOL_ALGEBRAIC),
        CheckReport::new("closed/N2/1-2,3-4", inputs, f_det(&"1-2,3-4".parse()?, x)?.value, simple, TOL_ALGEBRAIC),
    ])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    All,
    Pde,
    Mobius,
    Asy,
    Lim,
    Sum,
}

impl std::str::FromStr for Suite {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "all" => Suite::All,
            "pde" => Suite::Pde,
            "mobius" => Suite::Mobius,
            "asy" => Suite::Asy,
            "lim" => Suite::Lim,
            "sum" => Suite::Sum,
            _ => return Err(format!("unknown suite `{s}` (expected all|pde|mobius|asy|lim|sum)")),
        })
    }
}

type Job = Box<dyn Fn() -> Result<Vec<CheckReport>, VerifyError> + Send + Sync>;

fn one(r: Result<CheckReport, VerifyError>) -> Result<Vec<CheckReport>, VerifyError> {
    r.map(|c| vec![c])
}

/// Runs a suite for patterns with `n` links; configurations are drawn from
/// `seed`. Errors are reported as failed checks.
pub fn run_suite(suite: Suite, n: usize, seed: u64) -> Result<Vec<CheckReport>, VerifyError> {
    let pats: Vec<LinkPattern> = linkpat::patterns(n)?.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = random_config(n, &mut rng);
    let has = |s: Suite| suite == Suite::All || suite == s;
    let mut jobs: Vec<(String, Job)> = Vec::new();
    for b in &pats {
        for t in [Target::F(b.clone()), Target::Z(b.clone())] {
            if has(Suite::Pde) {
                for j in 1..=2 * n {
                    let (t, x) = (t.clone(), x.clone());
                    jobs.push((format!("pde/{}/{j}", label(&t)), Box::new(move || one(pde_residual(&t, &x, j)))));
                }
            }
            if has(Suite::Mobius) {
                let xi = -0.5 / x.x(2 * n).abs().max(x.x(1).abs()).max(1.0);
                for map in [MobiusMap::Translation(5.0), MobiusMap::Scaling(3.0), MobiusMap::SpecialConformal(xi)] {
                    let (t, x) = (t.clone(), x.clone());
                    jobs.push((format!("mobius/{}/{}", label(&t), map.name()), Box::new(move || one(mobius_check(&t, &x, map)))));
                }
            }
            if has(Suite::Asy) {
                for j in 1..2 * n {
                    let (tj, mut y) = (t.clone(), x.points().to_vec());
                    y.drain(j - 1..j + 1);
                    jobs.push((
                        format!("asy/{}/{j}", label(&tj)),
                        Box::new(move || {
                            let log = fusion_channel(&tj, j)?.1;
                            one(if log { asy_log(&tj, &y, j) } else { asy_pi(&tj, &y, j) })
                        }),
                    ));
                    if let Target::Z(a) = &t {
                        // one fibre check per fibre, anchored at its first member
                        let first = !a.contains(j, j + 1) && wp_fibre(a, j).map(|f| f[0] == *a).unwrap_or(true);
                        if first {
                            let (a, mut y) = (a.clone(), x.points().to_vec());
                            y.drain(j - 1..j + 1);
                            jobs.push((format!("asy-fibre/{a}/{j}"), Box::new(move || one(asy_pi_fibre(&a, &y, j)))));
                        }
                    }
                }
            }
        }
        if has(Suite::Sum) {
            let (b, x) = (b.clone(), x.clone());
            jobs.push((format!("sum/{b}"), Box::new(move || one(sum_rule(&b, &x)))));
        }
        if suite == Suite::All {
            let (b1, x1) = (b.clone(), x.clone());
            jobs.push((format!("matrix/{b1}"), Box::new(move || one(matrix_identity(&b1, &x1)))));
            let b2 = b.clone();
            jobs.push((format!("det/{b2}"), Box::new(move || Ok(vec![det_check(&b2)]))));
            if n >= 2 && n <= 4 {
                let (b3, x3) = (b.clone(), x.clone());
                jobs.push((format!("routes/{b3}"), Box::new(move || one(route_agreement(&b3, &x3)))));
            }
            if n >= 2 && !b.contains(1, 2 * n) {
                let (b4, x4) = (b.clone(), x.clone());
                jobs.push((format!("drift/{b4}"), Box::new(move || one(drift_identity(&b4, &x4)))));
            }
        }
    }
    if has(Suite::Lim) {
        for a in &pats {
            let a = a.clone();
            jobs.push((
                format!("lim/{a}"),
                Box::new(move || {
                    let vals = lim_alpha(&a)?;
                    let pats = linkpat::patterns(a.n())?;
                    Ok(pats.iter().zip(vals).map(|(b, v)| lim_report(&a, b, v)).collect())
                }),
            ));
        }
    }
    if suite == Suite::All {
        let xp = x.clone();
        jobs.push(("pos".into(), Box::new(move || positivity(&xp))));
        if n == 1 {
            jobs.push(("closed/N1".into(), Box::new(|| one(closed_form_one()))));
        }
        if n == 2 {
            let x = x.clone();
            jobs.push(("closed/N2".into(), Box::new(move || closed_form_two(&x))));
        }
    }
    let results: Vec<Vec<CheckReport>> = jobs
        .par_iter()
        .map(|(id, job)| match job() {
            Ok(r) => r,
            Err(e) => vec![CheckReport::defect(id.clone(), fmt_x(x.points()), f64::NAN, 0.0).fail_if(true, &e.to_string())],
        })
        .collect();
    Ok(results.into_iter().flatten().collect())
}

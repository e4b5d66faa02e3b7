//! `sle8` command-line front end.
//!
//! Exit codes: 0 on success, 1 when a check or computation fails, 2 on
//! invalid usage.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use sle8::coulomb::{self, Target};
use sle8::linkpat::{self, meander_entry, LinkPattern};
use sle8::loewner::{self, SimParams};
use sle8::quad::Config;
use sle8::scmap::{self, SlitMap};
use sle8::ust::{self, LatticePolygon, RectSpec, WiredGraph};
use sle8::verify::{self, CheckReport, Suite};

const SCHEMA: u32 = 1;

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Failed(String),
    #[error("{0} check(s) failed")]
    Checks(usize),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

fn failed(e: impl std::fmt::Display) -> CliError {
    CliError::Failed(e.to_string())
}

#[derive(Parser)]
#[command(name = "sle8", version, about = "SLE(8) partition functions, UST crossing probabilities and checks")]
struct Cli {
    /// Worker threads for sampling and parallel checks.
    #[arg(long, global = true, env = "SLE8_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Partition functions and crossing probabilities at one configuration.
    Eval(EvalArgs),
    /// Monte Carlo connectivity frequencies of the lattice spanning tree.
    Sample(SampleArgs),
    /// Run a verification suite.
    Verify(VerifyArgs),
    /// Tabulate the slit-rectangle map on a grid.
    Map(MapArgs),
    /// Simulate Loewner driving processes.
    Loewner(LoewnerArgs),
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    beta: LinkPattern,
    /// Increasing marked points, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    x: Vec<f64>,
    #[arg(long, default_value = "json")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    beta: LinkPattern,
    /// Lattice size `WxH`; the rectangle has unit width and mesh `1/W`.
    #[arg(long, default_value = "50x50")]
    grid: String,
    /// Marked points `x,y;x,y;...` on the boundary of the rectangle,
    /// counterclockwise from the middle of the top side. Evenly spaced
    /// along the boundary when omitted.
    #[arg(long, allow_hyphen_values = true)]
    marks: Option<String>,
    #[arg(long, default_value_t = 100_000)]
    n: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// CSV output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a JSON summary.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value = "all")]
    suite: Suite,
    #[arg(long = "N", default_value_t = 3)]
    n: usize,
    #[arg(long, default_value_t = 11)]
    seed: u64,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct MapArgs {
    #[arg(long)]
    beta: LinkPattern,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    x: Vec<f64>,
    /// Grid points along the real axis.
    #[arg(long, default_value_t = 41)]
    nx: usize,
    /// Grid points along the imaginary axis.
    #[arg(long, default_value_t = 21)]
    ny: usize,
    /// Height of the sampled region.
    #[arg(long, default_value_t = 2.0)]
    ymax: f64,
    /// CSV output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON file for the map parameters.
    #[arg(long)]
    params: Option<PathBuf>,
}

#[derive(Args)]
struct LoewnerArgs {
    /// Boundary condition whose partition function drives the chain.
    #[arg(long)]
    beta: LinkPattern,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    x: Vec<f64>,
    /// Index of the growing point.
    #[arg(long, default_value_t = 1)]
    i: usize,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 0.05)]
    horizon: f64,
    #[arg(long, default_value_t = 1)]
    paths: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Report martingale statistics of the crossing probability of this
    /// pattern instead of the paths.
    #[arg(long)]
    alpha: Option<LinkPattern>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn config(x: &[f64]) -> Result<Config, CliError> {
    Config::new(x.to_vec()).map_err(|e| CliError::Usage(format!("--x: {e}")))
}

fn check_size(p: &LinkPattern, x: &Config) -> Result<(), CliError> {
    if 2 * p.n() != x.len() {
        return Err(CliError::Usage(format!("pattern {p} needs {} points, got {}", 2 * p.n(), x.len())));
    }
    Ok(())
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<(), CliError> {
    let mut w = sink(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

fn threads(cli: Option<usize>) -> usize {
    cli.filter(|&t| t > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

#[derive(Serialize, Deserialize)]
struct EvalOutput {
    schema: u32,
    beta: String,
    x: Vec<f64>,
    #[serde(rename = "F")]
    f: f64,
    #[serde(rename = "Z")]
    z: BTreeMap<String, f64>,
    /// Crossing probabilities of the patterns compatible with `beta`.
    p: BTreeMap<String, f64>,
    est_error: f64,
}

fn eval(args: EvalArgs) -> Result<(), CliError> {
    let x = config(&args.x)?;
    check_size(&args.beta, &x)?;
    let f = coulomb::f_det(&args.beta, &x).map_err(failed)?;
    let zs = coulomb::z_all(&x).map_err(failed)?;
    let pats = linkpat::patterns(args.beta.n()).map_err(failed)?;
    let mut z = BTreeMap::new();
    let mut p = BTreeMap::new();
    let mut est_error = f.est_error / f.value.abs();
    for (a, v) in pats.iter().zip(&zs) {
        z.insert(a.to_string(), v.value);
        if meander_entry(a, &args.beta) {
            p.insert(a.to_string(), v.value / f.value);
            est_error = est_error.max(v.est_error / v.value.abs());
        }
    }
    let out = EvalOutput { schema: SCHEMA, beta: args.beta.to_string(), x: args.x, f: f.value, z, p, est_error };
    match args.format {
        Format::Json => write_json(args.out.as_deref(), &out),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(sink(args.out.as_deref())?);
            w.write_record(["alpha", "Z", "p"])?;
            for (a, p) in &out.p {
                w.write_record([a.clone(), out.z[a].to_string(), p.to_string()])?;
            }
            w.flush()?;
            Ok(())
        }
    }
}

fn parse_grid(s: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Usage(format!("--grid: expected WxH, got `{s}`"));
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((w.trim().parse().map_err(|_| bad())?, h.trim().parse().map_err(|_| bad())?))
}

fn parse_marks(s: &str) -> Result<Vec<(f64, f64)>, CliError> {
    s.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let bad = || CliError::Usage(format!("--marks: expected `x,y`, got `{p}`"));
            let (a, b) = p.split_once(',').ok_or_else(bad)?;
            Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct SampleRow {
    alpha: String,
    count: u64,
    freq: f64,
    ci_lo: f64,
    ci_hi: f64,
    exact_p: f64,
}

#[derive(Serialize, Deserialize)]
struct SampleOutput {
    schema: u32,
    beta: String,
    grid: (usize, usize),
    marks: Vec<usize>,
    x: Vec<f64>,
    samples: u64,
    seed: u64,
    threads: usize,
    rows: Vec<SampleRow>,
}

fn sample(args: SampleArgs, threads: usize) -> Result<(), CliError> {
    let (w, h) = parse_grid(&args.grid)?;
    let n = args.beta.n();
    let delta = 1.0 / w as f64;
    let poly = match &args.marks {
        Some(m) => {
            let marks = parse_marks(m)?;
            if marks.len() != 2 * n {
                return Err(CliError::Usage(format!("--marks: pattern {} needs {} marks, got {}", args.beta, 2 * n, marks.len())));
            }
            LatticePolygon::build(&RectSpec { width: 1.0, height: h as f64 * delta, marks }, delta)
        }
        None => {
            let len = 2 * (w + h);
            let idx = (1..=2 * n).map(|k| ((k as f64 - 0.5) * len as f64 / (2 * n) as f64).round() as usize).collect();
            LatticePolygon::from_grid(w, h, idx, delta)
        }
    }
    .map_err(|e| CliError::Usage(e.to_string()))?;
    let x = poly.continuum_points().map_err(failed)?;
    let marks = poly.marks.clone();
    let g = WiredGraph::new(poly, args.beta.clone()).map_err(|e| CliError::Usage(e.to_string()))?;
    let counts = ust::mc_crossing(&g, args.n, args.seed, threads).map_err(failed)?;
    let exact = coulomb::crossing_probs(&args.beta, &x).map_err(failed)?;
    let rows: Vec<SampleRow> = exact
        .iter()
        .map(|(a, p)| {
            let (ci_lo, ci_hi) = counts.interval(a);
            SampleRow { alpha: a.to_string(), count: counts.count(a), freq: counts.frequency(a), ci_lo, ci_hi, exact_p: *p }
        })
        .collect();
    let mut wr = csv::Writer::from_writer(sink(args.out.as_deref())?);
    for r in &rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    eprintln!("sample: beta={} grid={w}x{h} n={} seed={} threads={threads}", args.beta, args.n, args.seed);
    if let Some(path) = &args.json {
        let out = SampleOutput {
            schema: SCHEMA,
            beta: args.beta.to_string(),
            grid: (w, h),
            marks,
            x: x.points().to_vec(),
            samples: counts.samples,
            seed: args.seed,
            threads,
            rows,
        };
        write_json(Some(path), &out)?;
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct VerifyOutput {
    schema: u32,
    suite: Suite,
    n: usize,
    seed: u64,
    threads: usize,
    passed: usize,
    failed: usize,
    checks: Vec<CheckReport>,
}

fn run_verify(args: VerifyArgs, threads: usize) -> Result<(), CliError> {
    if !(1..=linkpat::MAX_MEANDER_N).contains(&args.n) {
        return Err(CliError::Usage(format!("--N must lie in 1..={}", linkpat::MAX_MEANDER_N)));
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(failed)?;
    let mut checks = pool.install(|| verify::run_suite(args.suite, args.n, args.seed)).map_err(failed)?;
    checks.sort_by(|a, b| a.id.cmp(&b.id));
    let n_failed = checks.iter().filter(|c| !c.pass).count();
    {
        let mut out = io::stdout().lock();
        for c in &checks {
            let tag = if c.pass { "PASS" } else { "FAIL" };
            writeln!(out, "{tag} {:<40} measured={:.6e} target={:.6e} tol={:.1e} {}", c.id, c.measured, c.target, c.tolerance, c.detail)?;
        }
        writeln!(out, "{} passed, {} failed", checks.len() - n_failed, n_failed)?;
    }
    if let Some(path) = &args.json {
        let out = VerifyOutput {
            schema: SCHEMA,
            suite: args.suite,
            n: args.n,
            seed: args.seed,
            threads,
            passed: checks.len() - n_failed,
            failed: n_failed,
            checks,
        };
        write_json(Some(path), &out)?;
    }
    if n_failed > 0 {
        return Err(CliError::Checks(n_failed));
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct MapOutput {
    schema: u32,
    beta: String,
    x: Vec<f64>,
    nu: Vec<f64>,
    mu: Vec<f64>,
    #[serde(rename = "H")]
    h: (f64, f64),
    #[serde(rename = "K")]
    k: (f64, f64),
    closure_residuals: Vec<f64>,
}

fn map(args: MapArgs) -> Result<(), CliError> {
    let x = config(&args.x)?;
    check_size(&args.beta, &x)?;
    if args.nx < 2 || args.ny < 1 || !(args.ymax > 0.0) {
        return Err(CliError::Usage("--nx must be at least 2, --ny at least 1 and --ymax positive".into()));
    }
    let params = scmap::solve_q(&args.beta, &x).map_err(|e| match e {
        scmap::ScError::Link(_) => CliError::Usage(e.to_string()),
        _ => failed(e),
    })?;
    let hk = scmap::expansion_hk(&args.beta, &x).map_err(failed)?;
    let sm = SlitMap::new(params.clone()).map_err(failed)?;
    let (lo, hi) = (x.x(1) - 1.0, x.x(x.len()) + 1.0);
    let mut w = csv::Writer::from_writer(sink(args.out.as_deref())?);
    w.write_record(["z_re", "z_im", "phi_re", "phi_im"])?;
    for iy in 1..=args.ny {
        let b = args.ymax * iy as f64 / args.ny as f64;
        for ix in 0..args.nx {
            let a = lo + (hi - lo) * ix as f64 / (args.nx - 1) as f64;
            let v = sm.eval(Complex64::new(a, b)).map_err(failed)?;
            w.write_record([a.to_string(), b.to_string(), v.re.to_string(), v.im.to_string()])?;
        }
    }
    w.flush()?;
    if let Some(path) = &args.params {
        let out = MapOutput {
            schema: SCHEMA,
            beta: args.beta.to_string(),
            x: args.x.clone(),
            nu: params.nu.clone(),
            mu: params.mu.clone(),
            h: (hk.h.re, hk.h.im),
            k: (hk.k.re, hk.k.im),
            closure_residuals: sm.closure_residuals().map_err(failed)?,
        };
        write_json(Some(path), &out)?;
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct MartingaleOutput {
    schema: u32,
    beta: String,
    alpha: String,
    x: Vec<f64>,
    i: usize,
    dt: f64,
    horizon: f64,
    seed: u64,
    threads: usize,
    stat: loewner::MartingaleStat,
    consistent_3sigma: bool,
}

fn run_loewner(args: LoewnerArgs, threads: usize) -> Result<(), CliError> {
    let x = config(&args.x)?;
    check_size(&args.beta, &x)?;
    if args.i == 0 || args.i > x.len() {
        return Err(CliError::Usage(format!("--i must lie in 1..={}", x.len())));
    }
    if !(args.dt > 0.0) || !(args.horizon > 0.0) {
        return Err(CliError::Usage("--dt and --horizon must be positive".into()));
    }
    let params = SimParams::new(args.dt, args.horizon);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(failed)?;
    if let Some(alpha) = &args.alpha {
        if alpha.n() != args.beta.n() || !meander_entry(alpha, &args.beta) {
            return Err(CliError::Usage(format!("--alpha {alpha} is not compatible with --beta {}", args.beta)));
        }
        let stat = pool
            .install(|| loewner::martingale_check(&x, args.i, &args.beta, alpha, args.paths, params, args.seed))
            .map_err(failed)?;
        let out = MartingaleOutput {
            schema: SCHEMA,
            beta: args.beta.to_string(),
            alpha: alpha.to_string(),
            x: args.x.clone(),
            i: args.i,
            dt: args.dt,
            horizon: args.horizon,
            seed: args.seed,
            threads,
            consistent_3sigma: stat.consistent(3.0),
            stat,
        };
        return write_json(args.out.as_deref(), &out);
    }
    let target = Target::F(args.beta.clone());
    let mut w = csv::Writer::from_writer(sink(args.out.as_deref())?);
    let mut header = vec!["path".to_string(), "t".into(), "W".into()];
    header.extend((1..x.len()).map(|k| format!("V{k}")));
    w.write_record(&header)?;
    for p in 0..args.paths {
        let path = loewner::simulate(&x, args.i, &target, params, args.seed.wrapping_add(p as u64)).map_err(failed)?;
        for s in &path.states {
            let mut rec = vec![p.to_string(), s.t.to_string(), s.w.to_string()];
            rec.extend(s.v.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    eprintln!("loewner: beta={} paths={} seed={} threads={threads}", args.beta, args.paths, args.seed);
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let threads = threads(cli.threads);
    match cli.command {
        Command::Eval(a) => eval(a),
        Command::Sample(a) => sample(a, threads),
        Command::Verify(a) => run_verify(a, threads),
        Command::Map(a) => map(a),
        Command::Loewner(a) => run_loewner(a, threads),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

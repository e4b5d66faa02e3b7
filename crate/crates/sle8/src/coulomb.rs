//! Coulomb-gas partition functions `F_beta`, pure partition functions
//! `Z_alpha`, crossing probabilities and logarithmic derivatives.
//!
//! Two routes evaluate `F_beta`. The simplex route sums manifestly positive
//! tensor integrals. The determinant route assembles the period matrix
//! `P_beta` from one-dimensional interval moments and is the production path.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linkpat::{self, LinkError, LinkPattern};
use crate::quad::{self, Config, IntervalRule, QuadError};

/// Relative imaginary residue above which the determinant route reports a
/// branch error.
pub const PHASE_TOL: f64 = 1e-6;
/// Relative finite-difference step.
pub const FD_ETA: f64 = 1e-4;
/// Tolerance for building interval rules.
pub const RULE_TOL: f64 = 1e-11;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoulombError {
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error("pattern has {0} links but configuration has {1} points")]
    SizeMismatch(usize, usize),
    #[error("imaginary residue {ratio:.3e} of the determinant route exceeds tolerance")]
    Phase { ratio: f64 },
    #[error("non-positive value {0:e}")]
    NotPositive(f64),
    #[error("index {0} outside 1..={1}")]
    BadIndex(usize, usize),
    #[error("mapped points are not increasing")]
    MappedOrder,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    Simplex,
    Determinant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionValue {
    pub value: f64,
    pub im_residue: f64,
    pub est_error: f64,
    pub route: Route,
}

/// `i^m` exactly.
pub fn ipow(m: i64) -> Complex64 {
    match m.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// `(-i)^m` exactly.
pub fn neg_ipow(m: i64) -> Complex64 {
    ipow(-m)
}

/// `prod_{i<j} (x_j - x_i)^{1/4}`.
pub fn f0(x: &Config) -> f64 {
    log_f0(x).exp()
}

pub fn log_f0(x: &Config) -> f64 {
    let p = x.points();
    let mut s = 0.0;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            s += (p[j] - p[i]).ln();
        }
    }
    0.25 * s
}

fn check_size(n: usize, x: &Config) -> Result<(), CoulombError> {
    if 2 * n != x.len() {
        Err(CoulombError::SizeMismatch(n, x.len()))
    } else {
        Ok(())
    }
}

/// Frozen panel rules for every interval of a configuration.
#[derive(Clone, Debug)]
pub struct Plan {
    rules: Vec<IntervalRule>,
}

impl Plan {
    pub fn new(x: &Config) -> Result<Self, QuadError> {
        Self::with_tol(x, RULE_TOL)
    }

    pub fn with_tol(x: &Config, tol: f64) -> Result<Self, QuadError> {
        let rules = (1..x.len()).map(|k| quad::interval_rule(x, k, tol)).collect::<Result<_, _>>()?;
        Ok(Self { rules })
    }

    /// Every panel halved.
    pub fn refined(&self) -> Self {
        let rules = self
            .rules
            .iter()
            .map(|r| IntervalRule {
                k: r.k,
                panels: r
                    .panels
                    .iter()
                    .flat_map(|&(lo, hi)| {
                        let m = 0.5 * (lo + hi);
                        [(lo, m), (m, hi)]
                    })
                    .collect(),
            })
            .collect();
        Self { rules }
    }

    pub fn nodes_used(&self) -> usize {
        self.rules.iter().map(|r| r.nodes_used()).sum()
    }
}

/// Interval moments `I[k-1][s] = int_{x_k}^{x_{k+1}} (u - c)^s prod |u - x_j|^{-1/2} du`.
#[derive(Clone, Debug)]
pub struct Moments {
    pub center: f64,
    pub values: Vec<Vec<f64>>,
}

impl Moments {
    pub fn compute(x: &Config, plan: &Plan, n_moments: usize) -> Self {
        let center = x.mean();
        let values = plan.rules.iter().map(|r| quad::apply_rule_moments(x, r, center, n_moments)).collect();
        Self { center, values }
    }

    /// `I_{k,s}` with 1-based `k` and 0-based power `s`.
    pub fn get(&self, k: usize, s: usize) -> f64 {
        self.values[k - 1][s]
    }
}

/// `(P_beta)_{r,s} = sum_{k=a_r}^{b_r - 1} (-i)^{2N-k} I_{k,s}` in the centered basis.
pub fn period_matrix(beta: &LinkPattern, mom: &Moments) -> DMatrix<Complex64> {
    let n = beta.n();
    let n2 = 2 * n as i64;
    DMatrix::from_fn(n, n, |r, s| {
        let (a, b) = beta.links()[r];
        (a..b).map(|k| neg_ipow(n2 - k as i64) * mom.get(k, s)).sum()
    })
}

/// `i^{sum_t (2N - a_t)} det P_beta` (without the `f0` factor).
fn phased_det(beta: &LinkPattern, mom: &Moments) -> Complex64 {
    let n2 = 2 * beta.n() as i64;
    let phase: i64 = beta.links().iter().map(|&(a, _)| n2 - a as i64).sum();
    ipow(phase) * period_matrix(beta, mom).determinant()
}

/// Values `F_beta` for every `beta` in [`linkpat::patterns`] order, from one
/// set of moments. Returns `(value, im_residue)` pairs.
pub fn f_all_with(x: &Config, plan: &Plan) -> Result<Vec<(f64, f64)>, CoulombError> {
    let n = x.n_links();
    let mom = Moments::compute(x, plan, n);
    let lf0 = log_f0(x);
    let pats = linkpat::patterns(n)?;
    Ok(pats
        .iter()
        .map(|b| {
            let d = phased_det(b, &mom);
            let s = lf0.exp();
            (s * d.re, s * d.im.abs())
        })
        .collect())
}

fn f_one_with(beta: &LinkPattern, x: &Config, plan: &Plan) -> (f64, f64) {
    let mom = Moments::compute(x, plan, beta.n());
    let d = phased_det(beta, &mom);
    let s = f0(x);
    (s * d.re, s * d.im.abs())
}

fn gate(value: f64, im: f64) -> Result<(), CoulombError> {
    if !(im <= PHASE_TOL * value.abs()) {
        return Err(CoulombError::Phase { ratio: im / value.abs() });
    }
    Ok(())
}

/// `F_beta` by the determinant route.
pub fn f_det(beta: &LinkPattern, x: &Config) -> Result<PartitionValue, CoulombError> {
    check_size(beta.n(), x)?;
    let plan = Plan::new(x)?;
    let (v0, _) = f_one_with(beta, x, &plan);
    let (v, im) = f_one_with(beta, x, &plan.refined());
    gate(v, im)?;
    Ok(PartitionValue { value: v, im_residue: im, est_error: (v - v0).abs(), route: Route::Determinant })
}

/// `F_beta` for all patterns of size `N = x.n_links()`.
pub fn f_det_all(x: &Config) -> Result<Vec<PartitionValue>, CoulombError> {
    let plan = Plan::new(x)?;
    let coarse = f_all_with(x, &plan)?;
    let fine = f_all_with(x, &plan.refined())?;
    coarse
        .into_iter()
        .zip(fine)
        .map(|((v0, _), (v, im))| {
            gate(v, im)?;
            Ok(PartitionValue { value: v, im_residue: im, est_error: (v - v0).abs(), route: Route::Determinant })
        })
        .collect()
}

/// `F_beta = f0 * sum_k c_beta(k) rho_k` by tensor quadrature.
pub fn f_simplex(beta: &LinkPattern, x: &Config) -> Result<PartitionValue, CoulombError> {
    check_size(beta.n(), x)?;
    let s = f0(x);
    let mut value = 0.0;
    let mut err = 0.0;
    for k in linkpat::coefficient_support(beta) {
        let r = quad::simplex_integral(x, &k)?;
        value += r.value;
        err += r.est_error;
    }
    Ok(PartitionValue { value: s * value, im_residue: 0.0, est_error: s * err, route: Route::Simplex })
}

/// `Z_alpha = sum_beta M^{-1}_{alpha,beta} F_beta` for every `alpha`.
pub fn z_all_with(x: &Config, plan: &Plan) -> Result<Vec<f64>, CoulombError> {
    let f = f_all_with(x, plan)?;
    let minv = linkpat::meander_inverse_f64(x.n_links())?;
    Ok(minv.iter().map(|row| row.iter().zip(&f).map(|(m, (v, _))| m * v).sum()).collect())
}

/// All `Z_alpha` in [`linkpat::patterns`] order.
pub fn z_all(x: &Config) -> Result<Vec<PartitionValue>, CoulombError> {
    let minv = linkpat::meander_inverse_f64(x.n_links())?;
    let f = f_det_all(x)?;
    Ok(minv
        .iter()
        .map(|row| {
            let mut value = 0.0;
            let mut err = 0.0;
            let mut im = 0.0;
            for (m, fb) in row.iter().zip(&f) {
                value += m * fb.value;
                err += m.abs() * fb.est_error;
                im += m.abs() * fb.im_residue;
            }
            PartitionValue { value, im_residue: im, est_error: err, route: Route::Determinant }
        })
        .collect())
}

pub fn z(alpha: &LinkPattern, x: &Config) -> Result<PartitionValue, CoulombError> {
    check_size(alpha.n(), x)?;
    let idx = linkpat::pattern_index(alpha);
    Ok(z_all(x)?.swap_remove(idx))
}

/// `M_{alpha,beta} Z_alpha / F_beta`.
pub fn crossing_prob(alpha: &LinkPattern, beta: &LinkPattern, x: &Config) -> Result<f64, CoulombError> {
    check_size(beta.n(), x)?;
    if alpha.n() != beta.n() {
        return Err(LinkError::SizeMismatch(alpha.n(), beta.n()).into());
    }
    if !linkpat::meander_entry(alpha, beta) {
        return Ok(0.0);
    }
    let plan = Plan::new(x)?.refined();
    let zs = z_all_with(x, &plan)?;
    let f = f_one_with(beta, x, &plan).0;
    Ok(zs[linkpat::pattern_index(alpha)] / f)
}

/// Crossing probabilities of every `alpha` compatible with `beta`.
pub fn crossing_probs(beta: &LinkPattern, x: &Config) -> Result<Vec<(LinkPattern, f64)>, CoulombError> {
    check_size(beta.n(), x)?;
    crossing_probs_with(beta, x, &Plan::new(x)?.refined())
}

pub fn crossing_probs_with(
    beta: &LinkPattern,
    x: &Config,
    plan: &Plan,
) -> Result<Vec<(LinkPattern, f64)>, CoulombError> {
    let zs = z_all_with(x, plan)?;
    let f = f_one_with(beta, x, plan).0;
    Ok(linkpat::patterns(beta.n())?
        .iter()
        .zip(zs)
        .filter(|(a, _)| linkpat::meander_entry(a, beta))
        .map(|(a, z)| (a.clone(), z / f))
        .collect())
}

/// Which function to differentiate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Target {
    F(LinkPattern),
    Z(LinkPattern),
}

impl Target {
    pub fn pattern(&self) -> &LinkPattern {
        match self {
            Target::F(p) | Target::Z(p) => p,
        }
    }

    /// Evaluates the target with a frozen plan.
    pub fn eval_with(&self, x: &Config, plan: &Plan) -> Result<f64, CoulombError> {
        match self {
            Target::F(b) => Ok(f_one_with(b, x, plan).0),
            Target::Z(a) => Ok(z_all_with(x, plan)?[linkpat::pattern_index(a)]),
        }
    }

    pub fn eval(&self, x: &Config) -> Result<f64, CoulombError> {
        check_size(self.pattern().n(), x)?;
        self.eval_with(x, &Plan::new(x)?.refined())
    }
}

/// `d/dx_i log(target)` by Richardson-extrapolated central differences with
/// a quadrature plan frozen across the stencil.
pub fn dlog(target: &Target, x: &Config, i: usize) -> Result<f64, CoulombError> {
    check_size(target.pattern().n(), x)?;
    if i == 0 || i > x.len() {
        return Err(CoulombError::BadIndex(i, x.len()));
    }
    let plan = Plan::new(x)?.refined();
    let h = FD_ETA * x.local_gap(i);
    let lg = |d: f64| -> Result<f64, CoulombError> {
        let v = target.eval_with(&x.shifted(i, d)?, &plan)?;
        if v <= 0.0 {
            return Err(CoulombError::NotPositive(v));
        }
        Ok(v.ln())
    };
    let d1 = (lg(h)? - lg(-h)?) / (2.0 * h);
    let d2 = (lg(0.5 * h)? - lg(-0.5 * h)?) / h;
    Ok((4.0 * d2 - d1) / 3.0)
}

pub fn dlog_f(beta: &LinkPattern, x: &Config, i: usize) -> Result<f64, CoulombError> {
    dlog(&Target::F(beta.clone()), x, i)
}

pub fn dlog_z(alpha: &LinkPattern, x: &Config, i: usize) -> Result<f64, CoulombError> {
    dlog(&Target::Z(alpha.clone()), x, i)
}

/// Covariant value `prod |phi'(y_j)|^{-1/8} F_beta(phi(y))` from boundary map
/// data: images `mapped = phi(y_j)` and derivatives `derivs = phi'(y_j)`.
pub fn f_polygon(beta: &LinkPattern, mapped: &[f64], derivs: &[f64]) -> Result<f64, CoulombError> {
    if mapped.len() != derivs.len() {
        return Err(CoulombError::SizeMismatch(beta.n(), derivs.len()));
    }
    let x = Config::new(mapped.to_vec()).map_err(|_| CoulombError::MappedOrder)?;
    check_size(beta.n(), &x)?;
    let f = f_det(beta, &x)?.value;
    let jac: f64 = derivs.iter().map(|d| d.abs().powf(-0.125)).product();
    Ok(jac * f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::hyp2f1_half;
    use std::f64::consts::PI;

    fn lp(s: &str) -> LinkPattern {
        s.parse().unwrap()
    }

    fn cfg(p: &[f64]) -> Config {
        Config::new(p.to_vec()).unwrap()
    }

    #[test]
    fn f0_examples() {
        assert!((f0(&cfg(&[0.0, 1.0])) - 1.0).abs() < 1e-15);
        assert!((f0(&cfg(&[0.0, 1.0, 2.0, 3.0])) - 12f64.powf(0.25)).abs() < 1e-14);
    }

    #[test]
    fn one_link_is_pi() {
        let b = lp("1-2");
        let x = cfg(&[0.0, 1.0]);
        assert!((f_det(&b, &x).unwrap().value - PI).abs() < 1e-13);
        assert!((f_simplex(&b, &x).unwrap().value - PI).abs() < 1e-12);
        let y = cfg(&[2.0, 18.0]);
        assert!((f_det(&b, &y).unwrap().value - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn two_links_closed_form() {
        let x = cfg(&[0.0, 1.0, 2.0, 3.0]);
        let z: f64 = 1.0 * 1.0 / (2.0 * 2.0);
        let simple = PI * PI * (3.0 * 1.0 * z).powf(0.25) * hyp2f1_half(z);
        let nested = PI * PI * (1.0 * 1.0 * (1.0 - z)).powf(0.25) * hyp2f1_half(1.0 - z);
        let fs = f_det(&lp("1-2,3-4"), &x).unwrap().value;
        let fn_ = f_det(&lp("1-4,2-3"), &x).unwrap().value;
        assert!((fs - simple).abs() < 1e-11 * simple, "{fs} {simple}");
        assert!((fn_ - nested).abs() < 1e-11 * nested, "{fn_} {nested}");
    }

    #[test]
    fn routes_agree_n3() {
        let x = cfg(&[-1.0, 0.3, 1.0, 2.2, 3.0, 4.5]);
        for b in linkpat::patterns(3).unwrap() {
            let d = f_det(b, &x).unwrap();
            let s = f_simplex(b, &x).unwrap();
            assert!((d.value - s.value).abs() < 1e-8 * d.value, "{b}: {} {}", d.value, s.value);
            assert!(d.im_residue <= 1e-10 * d.value);
        }
    }

    #[test]
    fn z_examples() {
        let x = cfg(&[0.0, 1.0, 2.5, 3.0]);
        let nested = f_det(&lp("1-4,2-3"), &x).unwrap().value;
        let zs = z(&lp("1-2,3-4"), &x).unwrap().value;
        assert!((zs - nested).abs() < 1e-12 * nested);
        assert_eq!(crossing_prob(&lp("1-2,3-4"), &lp("1-2,3-4"), &x).unwrap(), 0.0);
        assert!((crossing_prob(&lp("1-4,2-3"), &lp("1-2,3-4"), &x).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn n3_rainbow_has_two_outcomes() {
        let x = cfg(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let ps = crossing_probs(&lp("1-6,2-5,3-4"), &x).unwrap();
        let names: Vec<String> = ps.iter().map(|(a, _)| a.to_string()).collect();
        assert_eq!(names, vec!["1-2,3-6,4-5", "1-4,2-3,5-6"]);
        let s: f64 = ps.iter().map(|p| p.1).sum();
        assert!((s - 1.0).abs() < 1e-10);
        // mirror symmetry of the configuration swaps the two outcomes
        assert!((ps[0].1 - ps[1].1).abs() < 1e-10);
    }

    #[test]
    fn dlog_one_link() {
        let x = cfg(&[0.0, 1.0]);
        let d = dlog_f(&lp("1-2"), &x, 1).unwrap();
        assert!((d + 0.25).abs() < 1e-9, "{d}");
    }

    #[test]
    fn dlog_sum_rules() {
        let x = cfg(&[-0.5, 0.2, 1.0, 2.3, 3.1, 4.0]);
        for b in linkpat::patterns(3).unwrap() {
            let g: Vec<f64> = (1..=6).map(|i| dlog_f(b, &x, i).unwrap()).collect();
            let s: f64 = g.iter().sum();
            let e: f64 = g.iter().zip(x.points()).map(|(d, xi)| d * xi).sum();
            assert!(s.abs() < 1e-7, "{b}: {s}");
            assert!((e - 0.75).abs() < 1e-7, "{b}: {e}");
        }
    }

    #[test]
    fn polygon_identity_map() {
        let b = lp("1-4,2-3");
        let p = [0.0, 1.0, 2.0, 4.0];
        let v = f_polygon(&b, &p, &[1.0; 4]).unwrap();
        assert!((v - f_det(&b, &cfg(&p)).unwrap().value).abs() < 1e-14 * v);
        assert_eq!(f_polygon(&b, &[1.0, 0.0, 2.0, 3.0], &[1.0; 4]), Err(CoulombError::MappedOrder));
    }
}

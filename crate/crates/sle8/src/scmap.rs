//! Schwarz-Christoffel maps from the upper half-plane onto a unit-width
//! rectangle with horizontal slits.
//!
//! For `beta` without the link `{1, 2N}`, links are reordered so that the
//! link at `1` comes first and the link at `2N` last. The map is
//!
//! ```text
//! phi(z) = int_{x_1}^z Q(u) prod_j (u - x_j)^{-1/2} du / norm
//! ```
//!
//! with `Q` monic of degree `N - 2`, fixed by the slit conditions
//! `phi(x_a) = phi(x_b)` for the middle links, and `norm` the same integral
//! taken up to `x_{2p}` where `{1, 2p}` is in `beta`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coulomb::{ipow, neg_ipow, Moments, Plan};
use crate::linkpat::{LinkError, LinkPattern};
use crate::quad::{gauss_legendre, Config, QuadError};

/// Relative tolerance for the path integrals of [`slit_map`].
pub const PATH_TOL: f64 = 1e-12;
const PATH_NODE_CAP: usize = 1 << 14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScError {
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error("pattern has {0} links but configuration has {1} points")]
    SizeMismatch(usize, usize),
    #[error("slit maps need N >= 2 and {{1, 2N}} not in the pattern")]
    Precondition,
    #[error("matrix R is numerically singular")]
    Singular,
    #[error("polynomial coefficients have imaginary part {0:.3e}")]
    ComplexCoefficients(f64),
    #[error("root {0} of Q does not lie in its bracket")]
    RootOutOfBracket(String),
    #[error("path integral did not converge ({0} nodes)")]
    NoConvergence(usize),
    #[error("point {0} lies in the lower half-plane")]
    LowerHalfPlane(Complex64),
}

/// Parameters of the slit map for one configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SlitMapParams {
    pub beta: LinkPattern,
    /// Links with `{1, 2p}` first and `{2q-1, 2N}` last.
    pub order: Vec<(usize, usize)>,
    pub p: usize,
    pub q: usize,
    pub x: Vec<f64>,
    /// Expansion point of `Q`.
    pub center: f64,
    /// `Q(w) = (w - c)^{N-2} + sum_n nu[n] (w - c)^n`.
    pub nu: Vec<f64>,
    /// Roots of `Q`, one per middle link in `order`.
    pub mu: Vec<f64>,
    pub norm: Complex64,
}

impl SlitMapParams {
    pub fn config(&self) -> Config {
        Config::new(self.x.clone()).expect("stored configuration is valid")
    }

    pub fn n(&self) -> usize {
        self.beta.n()
    }

    /// `Q(w)` and `Q'(w)`.
    pub fn q_eval(&self, w: Complex64) -> (Complex64, Complex64) {
        let d = self.n() - 2;
        let t = w - self.center;
        let mut coeffs = self.nu.clone();
        coeffs.push(1.0);
        debug_assert_eq!(coeffs.len(), d + 1);
        let mut q = Complex64::new(0.0, 0.0);
        let mut dq = Complex64::new(0.0, 0.0);
        for &c in coeffs.iter().rev() {
            dq = dq * t + q;
            q = q * t + c;
        }
        (q, dq)
    }

    fn q_real(&self, u: f64) -> f64 {
        self.q_eval(Complex64::new(u, 0.0)).0.re
    }
}

/// Reorders `beta` with the link at `1` first and the link at `2N` last.
pub fn reorder(beta: &LinkPattern) -> Result<(Vec<(usize, usize)>, usize, usize), ScError> {
    let n = beta.n();
    if n < 2 || beta.contains(1, 2 * n) {
        return Err(ScError::Precondition);
    }
    let links = beta.links();
    let first = links[0];
    let last = *links.iter().find(|l| l.1 == 2 * n).expect("2N is linked");
    let mut order = vec![first];
    order.extend(links.iter().copied().filter(|&l| l != first && l != last));
    order.push(last);
    Ok((order, first.1 / 2, (last.0 + 1) / 2))
}

/// Interval moments with `n_moments` powers under a frozen plan.
fn moments(x: &Config, plan: &Plan, n_moments: usize) -> Moments {
    Moments::compute(x, plan, n_moments)
}

/// `int_{x_a}^{x_b}` of a weight given by its centered-basis coefficients,
/// along the real axis with boundary values from the upper half-plane.
fn link_integral(mom: &Moments, n2: usize, a: usize, b: usize, coeffs: &[f64]) -> Complex64 {
    (a..b)
        .map(|k| {
            let ik: f64 = coeffs.iter().enumerate().map(|(s, c)| c * mom.get(k, s)).sum();
            neg_ipow((n2 - k) as i64) * ik
        })
        .sum()
}

fn unit(n: usize, s: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[s] = 1.0;
    v
}

/// `R_{r,s} = int_{x_{a_{r+1}}}^{x_{b_{r+1}}} (u - c)^{s-1} prod (u - x_j)^{-1/2} du`.
pub fn matrix_r(beta: &LinkPattern, x: &Config) -> Result<DMatrix<Complex64>, ScError> {
    check(beta, x)?;
    let (order, _, _) = reorder(beta)?;
    let n = beta.n();
    let mom = moments(x, &Plan::new(x)?.refined(), n);
    Ok(DMatrix::from_fn(n - 2, n - 2, |r, s| {
        let (a, b) = order[r + 1];
        link_integral(&mom, 2 * n, a, b, &unit(n, s))
    }))
}

/// Period matrix `P_r,s = sum_{k=a_r}^{b_r-1} i^{k-a_r} I_{k,s}` in canonical
/// link order.
pub fn period_matrix_p(beta: &LinkPattern, x: &Config) -> Result<DMatrix<Complex64>, ScError> {
    check_size(beta, x)?;
    let n = beta.n();
    let mom = moments(x, &Plan::new(x)?.refined(), n);
    Ok(DMatrix::from_fn(n, n, |r, s| {
        let (a, b) = beta.links()[r];
        (a..b).map(|k| ipow((k - a) as i64) * mom.get(k, s)).sum()
    }))
}

/// Loop periods `P°_r,s = 2 sum_{k=a_r}^{b_r-1} (-i)^{k-a_r} I_{k,s}`.
pub fn loop_period_matrix(beta: &LinkPattern, x: &Config) -> Result<DMatrix<Complex64>, ScError> {
    check_size(beta, x)?;
    let n = beta.n();
    let mom = moments(x, &Plan::new(x)?.refined(), n);
    Ok(DMatrix::from_fn(n, n, |r, s| {
        let (a, b) = beta.links()[r];
        (a..b).map(|k| 2.0 * neg_ipow((k - a) as i64) * mom.get(k, s)).sum()
    }))
}

/// Combinatorial matrix with `M P = P°`: upper triangular, diagonal 2, and
/// `4 (-i)^{a_s - a_r}` when link `s` starts inside link `r`.
pub fn loop_matrix_m(beta: &LinkPattern) -> DMatrix<Complex64> {
    let n = beta.n();
    let l = beta.links();
    DMatrix::from_fn(n, n, |r, s| {
        if r == s {
            Complex64::new(2.0, 0.0)
        } else if r < s && l[s].0 < l[r].1 {
            4.0 * neg_ipow((l[s].0 - l[r].0) as i64)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// Determinant of [`loop_matrix_m`] as an exact Gaussian integer `(re, im)`.
pub fn loop_matrix_det(beta: &LinkPattern) -> (i64, i64) {
    let m = loop_matrix_m(beta);
    let n = beta.n();
    // exact Laplace expansion over Gaussian integers (entries are small)
    let to_int = |c: Complex64| (c.re.round() as i64, c.im.round() as i64);
    let ent: Vec<Vec<(i64, i64)>> = (0..n).map(|r| (0..n).map(|s| to_int(m[(r, s)])).collect()).collect();
    fn det(ent: &[Vec<(i64, i64)>], rows: &[usize], cols: &[usize]) -> (i64, i64) {
        if rows.is_empty() {
            return (1, 0);
        }
        let r = rows[0];
        let mut acc = (0i64, 0i64);
        for (ci, &c) in cols.iter().enumerate() {
            let e = ent[r][c];
            if e == (0, 0) {
                continue;
            }
            let sub_cols: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
            let d = det(ent, &rows[1..], &sub_cols);
            let prod = (e.0 * d.0 - e.1 * d.1, e.0 * d.1 + e.1 * d.0);
            let sign = if ci % 2 == 0 { 1 } else { -1 };
            acc = (acc.0 + sign * prod.0, acc.1 + sign * prod.1);
        }
        acc
    }
    let idx: Vec<usize> = (0..n).collect();
    det(&ent, &idx, &idx)
}

fn check_size(beta: &LinkPattern, x: &Config) -> Result<(), ScError> {
    if 2 * beta.n() != x.len() {
        Err(ScError::SizeMismatch(beta.n(), x.len()))
    } else {
        Ok(())
    }
}

fn check(beta: &LinkPattern, x: &Config) -> Result<(), ScError> {
    check_size(beta, x)?;
    reorder(beta).map(|_| ())
}

/// Solves for `Q`, its roots and the normalisation.
pub fn solve_q(beta: &LinkPattern, x: &Config) -> Result<SlitMapParams, ScError> {
    check(beta, x)?;
    solve_q_with(beta, x, &Plan::new(x)?.refined())
}

/// [`solve_q`] with a frozen quadrature plan.
pub fn solve_q_with(beta: &LinkPattern, x: &Config, plan: &Plan) -> Result<SlitMapParams, ScError> {
    let (order, p, q) = reorder(beta)?;
    let n = beta.n();
    let d = n - 2;
    let mom = moments(x, plan, n - 1);
    let r = DMatrix::from_fn(d, d, |r, s| {
        let (a, b) = order[r + 1];
        link_integral(&mom, 2 * n, a, b, &unit(n - 1, s))
    });
    let rhs = DVector::from_fn(d, |r, _| {
        let (a, b) = order[r + 1];
        link_integral(&mom, 2 * n, a, b, &unit(n - 1, d))
    });
    let sol = if d == 0 {
        DVector::zeros(0)
    } else {
        r.lu().solve(&(-rhs)).ok_or(ScError::Singular)?
    };
    let scale = sol.iter().map(|c| c.norm()).fold(1.0, f64::max);
    let im = sol.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
    if im > 1e-7 * scale {
        return Err(ScError::ComplexCoefficients(im / scale));
    }
    let nu: Vec<f64> = sol.iter().map(|c| c.re).collect();
    let center = mom.center;
    let mut coeffs = nu.clone();
    coeffs.push(1.0);
    let norm = link_integral(&mom, 2 * n, 1, 2 * p, &coeffs);
    let mu = roots(&nu, center, &order[1..n - 1], x)?;
    Ok(SlitMapParams { beta: beta.clone(), order, p, q, x: x.points().to_vec(), center, nu, mu, norm })
}

/// Real roots of the monic polynomial `t^d + sum nu[n] t^n` (shifted by
/// `center`), matched to the brackets `(x_a, x_b)` of the middle links.
fn roots(nu: &[f64], center: f64, middle: &[(usize, usize)], x: &Config) -> Result<Vec<f64>, ScError> {
    let d = nu.len();
    if d == 0 {
        return Ok(Vec::new());
    }
    let comp = DMatrix::from_fn(d, d, |r, c| {
        if c == d - 1 {
            -nu[r]
        } else if r == c + 1 {
            1.0
        } else {
            0.0
        }
    });
    let eig = comp.complex_eigenvalues();
    let poly = |t: f64| {
        let (mut v, mut dv) = (1.0, 0.0);
        for &c in nu.iter().rev() {
            dv = dv * t + v;
            v = v * t + c;
        }
        (v, dv)
    };
    let mut cand: Vec<f64> = eig
        .iter()
        .map(|z| {
            let mut t = z.re;
            for _ in 0..50 {
                let (v, dv) = poly(t);
                if dv == 0.0 {
                    break;
                }
                let step = v / dv;
                t -= step;
                if step.abs() <= 1e-16 * t.abs().max(1e-300) {
                    break;
                }
            }
            t + center
        })
        .collect();
    let spread = x.x(x.len()) - x.x(1);
    for z in eig.iter() {
        if z.im.abs() > 1e-6 * spread {
            return Err(ScError::RootOutOfBracket(format!("{z}")));
        }
    }
    cand.sort_by(|a, b| a.total_cmp(b));
    // narrowest bracket first
    let mut idx: Vec<usize> = (0..middle.len()).collect();
    idx.sort_by(|&i, &j| {
        let wi = x.x(middle[i].1) - x.x(middle[i].0);
        let wj = x.x(middle[j].1) - x.x(middle[j].0);
        wi.total_cmp(&wj)
    });
    let mut used = vec![false; d];
    let mut out = vec![f64::NAN; d];
    for i in idx {
        let (a, b) = middle[i];
        let (lo, hi) = (x.x(a), x.x(b));
        let pick = (0..d).find(|&j| !used[j] && cand[j] > lo && cand[j] < hi);
        match pick {
            Some(j) => {
                used[j] = true;
                out[i] = cand[j];
            }
            None => return Err(ScError::RootOutOfBracket(format!("bracket ({lo}, {hi}) has no root"))),
        }
    }
    Ok(out)
}

/// Adaptive Gauss-Legendre on `[0, 1]` for a smooth complex integrand.
fn adaptive(f: &impl Fn(f64) -> Complex64, tol: f64) -> Result<Complex64, ScError> {
    const ORDER: usize = 24;
    let (gx, gw) = gauss_legendre(ORDER);
    let panel = |lo: f64, hi: f64| -> Complex64 {
        let (c, r) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        gx.iter().zip(gw).map(|(&t, &w)| f(c + r * t) * (w * r)).sum()
    };
    let whole = panel(0.0, 1.0);
    let mut stack = vec![(0.0, 1.0, whole)];
    let mut total = Complex64::new(0.0, 0.0);
    let mut scale = whole.norm();
    let mut nodes = ORDER;
    while let Some((lo, hi, coarse)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let (l, r) = (panel(lo, mid), panel(mid, hi));
        nodes += 2 * ORDER;
        scale = scale.max((l + r).norm());
        if (l + r - coarse).norm() <= tol * scale * (hi - lo) || hi - lo < 1e-12 {
            total += l + r;
        } else {
            if nodes > PATH_NODE_CAP {
                return Err(ScError::NoConvergence(nodes));
            }
            stack.push((lo, mid, l));
            stack.push((mid, hi, r));
        }
    }
    Ok(total)
}

/// Integrand `Q(u) prod_j (u - x_j)^{-1/2}` with principal square roots.
fn integrand(params: &SlitMapParams, z: Complex64) -> Complex64 {
    let mut prod = Complex64::new(1.0, 0.0);
    for &xj in &params.x {
        prod *= (z - xj).sqrt();
    }
    params.q_eval(z).0 / prod
}

/// `int_e^a` along the real axis of `Q(u) prod_{j} |u - x_j|^{-1/2}` where
/// `e = x_{ie}` is a marked point, via `u = e + (a - e) s^2`.
fn anchored(params: &SlitMapParams, ie: usize, a: f64) -> Result<f64, ScError> {
    let x = &params.x;
    let e = x[ie - 1];
    let span = a - e;
    if span == 0.0 {
        return Ok(0.0);
    }
    let f = |s: f64| {
        let u = e + span * s * s;
        let mut prod = 1.0;
        for (j, &xj) in x.iter().enumerate() {
            if j + 1 != ie {
                prod *= (u - xj).abs();
            }
        }
        Complex64::new(2.0 * span.signum() * span.abs().sqrt() * params.q_real(u) / prod.sqrt(), 0.0)
    };
    Ok(adaptive(&f, PATH_TOL)?.re)
}

/// Full-interval integrals with phases, interval `k` from `x_k` to `x_{k+1}`.
fn interval_terms(params: &SlitMapParams) -> Result<Vec<Complex64>, ScError> {
    let n2 = params.x.len();
    (1..n2)
        .map(|k| {
            let half = 0.5 * (params.x[k] - params.x[k - 1]);
            let mid = params.x[k - 1] + half;
            // split at the midpoint so each half is anchored at its singular end
            let v = anchored(params, k, mid)? - anchored(params, k + 1, mid)?;
            Ok(neg_ipow((n2 - k) as i64) * v)
        })
        .collect()
}

/// `int_{x_1}^{a}` along the real axis, approached from above.
fn real_leg(params: &SlitMapParams, terms: &[Complex64], a: f64) -> Result<Complex64, ScError> {
    let x = &params.x;
    let n2 = x.len();
    if a <= x[0] {
        return Ok(neg_ipow(n2 as i64) * anchored(params, 1, a)?);
    }
    // interval containing a: x_k <= a < x_{k+1}, or k = 2N beyond the last point
    let k = x.partition_point(|&v| v <= a);
    let mut acc: Complex64 = terms[..k - 1].iter().sum();
    let phase = neg_ipow((n2 - k) as i64);
    if k == n2 {
        acc += phase * anchored(params, n2, a)?;
    } else if a - x[k - 1] <= x[k] - a {
        acc += phase * anchored(params, k, a)?;
    } else {
        acc += terms[k - 1] + phase * anchored(params, k + 1, a)?;
    }
    Ok(acc)
}

/// Precomputed interval terms for repeated evaluation of [`slit_map`].
#[derive(Clone, Debug)]
pub struct SlitMap {
    pub params: SlitMapParams,
    terms: Vec<Complex64>,
}

impl SlitMap {
    pub fn new(params: SlitMapParams) -> Result<Self, ScError> {
        let terms = interval_terms(&params)?;
        Ok(Self { params, terms })
    }

    /// `phi(z)` for `z` in the closed upper half-plane.
    pub fn eval(&self, z: Complex64) -> Result<Complex64, ScError> {
        if z.im < 0.0 {
            return Err(ScError::LowerHalfPlane(z));
        }
        let a = z.re;
        let b = z.im;
        let mut acc = real_leg(&self.params, &self.terms, a)?;
        if b > 0.0 {
            let f = |s: f64| {
                let zeta = Complex64::new(a, b * s * s);
                integrand(&self.params, zeta) * Complex64::new(0.0, 2.0 * b * s)
            };
            acc += adaptive(&f, PATH_TOL)?;
        }
        Ok(acc / self.params.norm)
    }

    /// `phi` at a real point.
    pub fn eval_real(&self, a: f64) -> Result<Complex64, ScError> {
        self.eval(Complex64::new(a, 0.0))
    }

    /// `|phi(x_a) - phi(x_b)|` for every middle link.
    pub fn closure_residuals(&self) -> Result<Vec<f64>, ScError> {
        let p = &self.params;
        let n = p.n();
        p.order[1..n - 1]
            .iter()
            .map(|&(a, b)| Ok((self.eval_real(p.x[a - 1])? - self.eval_real(p.x[b - 1])?).norm()))
            .collect()
    }
}

/// One-shot evaluation.
pub fn slit_map(params: &SlitMapParams, z: Complex64) -> Result<Complex64, ScError> {
    SlitMap::new(params.clone())?.eval(z)
}

/// Coefficients of `phi(z) = H (z - x_1)^{1/2} + K (z - x_1)^{3/2} + ...`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionHK {
    pub h: Complex64,
    pub k: Complex64,
}

fn hk_of(params: &SlitMapParams) -> ExpansionHK {
    let x = &params.x;
    let x1 = x[0];
    let mut prod = Complex64::new(1.0, 0.0);
    let mut inv_sum = 0.0;
    for &xj in &x[1..] {
        prod *= Complex64::new(x1 - xj, 0.0).sqrt();
        inv_sum += 1.0 / (xj - x1);
    }
    let (q, dq) = params.q_eval(Complex64::new(x1, 0.0));
    let den = prod * params.norm;
    ExpansionHK { h: 2.0 * q / den, k: (dq * (2.0 / 3.0) + q * (inv_sum / 3.0)) / den }
}

pub fn expansion_hk(beta: &LinkPattern, x: &Config) -> Result<ExpansionHK, ScError> {
    Ok(hk_of(&solve_q(beta, x)?))
}

/// `(3K - 2 d_1 H) / (2H)`, with `d_1 H` by Richardson-extrapolated central
/// differences under a frozen quadrature plan.
pub fn drift_from_map(beta: &LinkPattern, x: &Config) -> Result<f64, ScError> {
    check(beta, x)?;
    let plan = Plan::new(x)?.refined();
    let base = hk_of(&solve_q_with(beta, x, &plan)?);
    let h = 1e-4 * x.local_gap(1);
    let hval = |d: f64| -> Result<Complex64, ScError> { Ok(hk_of(&solve_q_with(beta, &x.shifted(1, d)?, &plan)?).h) };
    let d1 = (hval(h)? - hval(-h)?) / (2.0 * h);
    let d2 = (hval(0.5 * h)? - hval(-0.5 * h)?) / h;
    let dh = (d2 * 4.0 - d1) / 3.0;
    Ok(((3.0 * base.k - 2.0 * dh) / (2.0 * base.h)).re)
}

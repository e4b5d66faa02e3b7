//! Quadrature for integrals with inverse square-root endpoint singularities.
//!
//! On an interval `[x_k, x_{k+1}]` the substitution `u = m + h sin(theta)`
//! turns `du / sqrt((u - x_k)(x_{k+1} - u))` into `d theta`, so the
//! remaining integrand is analytic in `theta` and Gauss-Legendre converges
//! geometrically.

use std::collections::HashMap;
use std::f64::consts::FRAC_PI_2;
use std::sync::{Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default relative tolerance for one-dimensional integrals.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Default relative tolerance for tensor-product integrals.
pub const TENSOR_TOL: f64 = 1e-8;
/// Node cap for one-dimensional integrals.
pub const NODE_CAP: usize = 1 << 12;
/// Node cap per axis for tensor-product integrals.
pub const TENSOR_NODE_CAP: usize = 64;
/// Largest dimension accepted by [`simplex_integral`].
pub const TENSOR_DIM_CAP: usize = 5;

const PANEL_ORDER: usize = 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("configuration needs an even number (at least 2) of points, got {0}")]
    BadLength(usize),
    #[error("points must be finite and strictly increasing (position {0})")]
    NotIncreasing(usize),
    #[error("interval index {0} outside 1..={1}")]
    BadInterval(usize, usize),
    #[error("no convergence after {nodes} nodes (estimated error {err:.3e})")]
    NoConvergence { nodes: usize, err: f64 },
    #[error("tensor dimension {0} exceeds cap {1}")]
    DimensionCap(usize, usize),
}

/// Strictly increasing marked points `x_1 < ... < x_{2N}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Config {
    points: Vec<f64>,
}

impl Config {
    pub fn new(points: Vec<f64>) -> Result<Self, QuadError> {
        if points.len() < 2 || points.len() % 2 != 0 {
            return Err(QuadError::BadLength(points.len()));
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(QuadError::NotIncreasing(i + 1));
        }
        if let Some(i) = points.windows(2).position(|w| w[0] >= w[1]) {
            return Err(QuadError::NotIncreasing(i + 2));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// 1-based access.
    pub fn x(&self, i: usize) -> f64 {
        self.points[i - 1]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn n_links(&self) -> usize {
        self.points.len() / 2
    }

    pub fn min_gap(&self) -> f64 {
        self.points.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    /// Smallest distance from `x_i` to another marked point.
    pub fn local_gap(&self, i: usize) -> f64 {
        let p = &self.points;
        let mut g = f64::INFINITY;
        if i > 1 {
            g = g.min(p[i - 1] - p[i - 2]);
        }
        if i < p.len() {
            g = g.min(p[i] - p[i - 1]);
        }
        g
    }

    pub fn mean(&self) -> f64 {
        self.points.iter().sum::<f64>() / self.points.len() as f64
    }

    /// Copy with `x_i` shifted by `dx`, validated.
    pub fn shifted(&self, i: usize, dx: f64) -> Result<Self, QuadError> {
        let mut p = self.points.clone();
        p[i - 1] += dx;
        Self::new(p)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self, QuadError> {
        Self::new(self.points.iter().map(|&v| f(v)).collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadResult<T> {
    pub value: T,
    pub est_error: f64,
    pub nodes_used: usize,
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, cached per order.
pub fn gauss_legendre(n: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static CACHE: OnceLock<Mutex<HashMap<usize, &'static (Vec<f64>, Vec<f64>)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let mut guard = cache.lock().expect("node cache poisoned");
    guard.entry(n).or_insert_with(|| Box::leak(Box::new(compute_gl(n))))
}

fn compute_gl(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * z * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pn1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Distance of `u(theta)` to the endpoints, computed without cancellation.
#[inline]
fn endpoint_offsets(h: f64, theta: f64) -> (f64, f64) {
    // 1 + sin(theta) = 2 sin^2(theta/2 + pi/4)
    let s1 = (0.5 * theta + 0.25 * std::f64::consts::PI).sin();
    let s2 = (0.5 * theta - 0.25 * std::f64::consts::PI).sin();
    (2.0 * h * s1 * s1, 2.0 * h * s2 * s2)
}

/// Panel layout in `theta` for one interval, reusable across weights and
/// across nearby configurations.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalRule {
    pub k: usize,
    pub panels: Vec<(f64, f64)>,
}

impl IntervalRule {
    pub fn nodes_used(&self) -> usize {
        self.panels.len() * PANEL_ORDER
    }

    /// Quadrature nodes `(theta, weight)`.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let (gx, gw) = gauss_legendre(PANEL_ORDER);
        self.panels.iter().flat_map(move |&(lo, hi)| {
            let (c, r) = (0.5 * (lo + hi), 0.5 * (hi - lo));
            gx.iter().zip(gw).map(move |(&t, &w)| (c + r * t, r * w))
        })
    }
}

/// Evaluates `u` and the smooth kernel at `theta`.
#[inline]
fn kernel_at(x: &Config, k: usize, theta: f64) -> (f64, f64) {
    let p = x.points();
    let (a, b) = (x.x(k), x.x(k + 1));
    let h = 0.5 * (b - a);
    let (da, db) = endpoint_offsets(h, theta);
    let u = if da <= db { a + da } else { b - db };
    let mut prod = 1.0;
    for (j, &xj) in p.iter().enumerate() {
        if j + 1 < k {
            prod *= a - xj + da;
        } else if j + 1 > k + 1 {
            prod *= xj - b + db;
        }
    }
    (u, 1.0 / prod.sqrt())
}

fn panel_sum(x: &Config, k: usize, lo: f64, hi: f64, f: &impl Fn(f64) -> f64) -> f64 {
    let (gx, gw) = gauss_legendre(PANEL_ORDER);
    let (c, r) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    let mut s = 0.0;
    for (&t, &w) in gx.iter().zip(gw) {
        let (u, g) = kernel_at(x, k, c + r * t);
        s += w * g * f(u);
    }
    r * s
}

fn check_interval(x: &Config, k: usize) -> Result<(), QuadError> {
    if k == 0 || k >= x.len() {
        Err(QuadError::BadInterval(k, x.len() - 1))
    } else {
        Ok(())
    }
}

/// Builds an adaptive panel rule on interval `k` for the weight-1 kernel
/// (or a supplied positive reference weight), to relative tolerance `tol`.
pub fn interval_rule(x: &Config, k: usize, tol: f64) -> Result<IntervalRule, QuadError> {
    check_interval(x, k)?;
    let one = |_: f64| 1.0;
    // (lo, hi, coarse value, refined value)
    let split = |lo: f64, hi: f64| {
        let mid = 0.5 * (lo + hi);
        let l = panel_sum(x, k, lo, mid, &one);
        let r = panel_sum(x, k, mid, hi, &one);
        (l, r)
    };
    let mut work = vec![(-FRAC_PI_2, FRAC_PI_2, panel_sum(x, k, -FRAC_PI_2, FRAC_PI_2, &one))];
    let mut done: Vec<(f64, f64, f64)> = Vec::new();
    let mut total = work[0].2;
    loop {
        let mut next = Vec::new();
        let mut err_sum = 0.0;
        let mut new_total = done.iter().map(|d| d.2).sum::<f64>();
        let mut pending = Vec::new();
        for &(lo, hi, coarse) in &work {
            let mid = 0.5 * (lo + hi);
            let (l, r) = split(lo, hi);
            let e = (l + r - coarse).abs();
            new_total += l + r;
            pending.push((lo, mid, hi, l, r, e));
        }
        for &(lo, mid, hi, l, r, e) in &pending {
            // local acceptance: share of the budget proportional to width,
            // floored so that the node cap bounds the summed error by tol / 4
            let share = ((hi - lo) / std::f64::consts::PI).max(1.0 / 128.0);
            if e <= 0.1 * tol * total.abs() * share {
                done.push((lo, mid, l));
                done.push((mid, hi, r));
            } else {
                err_sum += e;
                next.push((lo, mid, l));
                next.push((mid, hi, r));
            }
        }
        total = new_total;
        let nodes = (done.len() + next.len()) * PANEL_ORDER;
        if next.is_empty() {
            break;
        }
        if nodes > NODE_CAP {
            return Err(QuadError::NoConvergence { nodes, err: err_sum / total.abs() });
        }
        work = next;
    }
    let mut panels: Vec<(f64, f64)> = done.into_iter().map(|(lo, hi, _)| (lo, hi)).collect();
    panels.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(IntervalRule { k, panels })
}

/// Applies a frozen rule to `weight(u) * prod_j |u - x_j|^{-1/2}`.
pub fn apply_rule(x: &Config, rule: &IntervalRule, weight: impl Fn(f64) -> f64) -> f64 {
    rule.nodes()
        .map(|(t, w)| {
            let (u, g) = kernel_at(x, rule.k, t);
            w * g * weight(u)
        })
        .sum()
}

/// Moments `int (u - c)^s prod_j |u - x_j|^{-1/2} du` for `s = 0..n_moments`
/// under a frozen rule.
pub fn apply_rule_moments(x: &Config, rule: &IntervalRule, center: f64, n_moments: usize) -> Vec<f64> {
    let mut out = vec![0.0; n_moments];
    for (t, w) in rule.nodes() {
        let (u, g) = kernel_at(x, rule.k, t);
        let d = u - center;
        let mut acc = w * g;
        for o in out.iter_mut() {
            *o += acc;
            acc *= d;
        }
    }
    out
}

/// `int_{x_k}^{x_{k+1}} weight(u) prod_j |u - x_j|^{-1/2} du`.
pub fn interval_integral(
    x: &Config,
    k: usize,
    weight: impl Fn(f64) -> f64,
    tol: f64,
) -> Result<QuadResult<f64>, QuadError> {
    let rule = interval_rule(x, k, tol)?;
    let value = apply_rule(x, &rule, &weight);
    // compare against the rule with every panel halved
    let fine = IntervalRule {
        k,
        panels: rule
            .panels
            .iter()
            .flat_map(|&(lo, hi)| {
                let m = 0.5 * (lo + hi);
                [(lo, m), (m, hi)]
            })
            .collect(),
    };
    let value_fine = apply_rule(x, &fine, &weight);
    Ok(QuadResult { value: value_fine, est_error: (value_fine - value).abs(), nodes_used: fine.nodes_used() + rule.nodes_used() })
}

/// Tensor-product integral of `prod_{r<s} |u_s - u_r| prod_{r,i} |u_r - x_i|^{-1/2}`
/// with `u_r` ranging over interval `k_r`.
pub fn simplex_integral(x: &Config, k: &[usize]) -> Result<QuadResult<f64>, QuadError> {
    simplex_integral_tol(x, k, TENSOR_TOL)
}

pub fn simplex_integral_tol(x: &Config, k: &[usize], tol: f64) -> Result<QuadResult<f64>, QuadError> {
    let dim = k.len();
    if dim > TENSOR_DIM_CAP {
        return Err(QuadError::DimensionCap(dim, TENSOR_DIM_CAP));
    }
    for &kr in k {
        check_interval(x, kr)?;
    }
    for r in 0..dim {
        if k[r + 1..].contains(&k[r]) {
            return Ok(QuadResult { value: 0.0, est_error: 0.0, nodes_used: 0 });
        }
    }
    // sort axes by interval; the integrand is symmetric under relabelling
    let mut ks = k.to_vec();
    ks.sort_unstable();
    let mut prev = tensor_at(x, &ks, 8);
    let mut n = 16;
    let mut used = 8;
    loop {
        let cur = tensor_at(x, &ks, n);
        used += n;
        let err = (cur - prev).abs();
        if err <= tol * cur.abs() {
            return Ok(QuadResult { value: cur, est_error: err, nodes_used: used });
        }
        if n >= TENSOR_NODE_CAP {
            return Err(QuadError::NoConvergence { nodes: used, err: err / cur.abs() });
        }
        prev = cur;
        n *= 2;
    }
}

fn tensor_at(x: &Config, ks: &[usize], n: usize) -> f64 {
    let (gx, gw) = gauss_legendre(n);
    let axes: Vec<Vec<(f64, f64)>> = ks
        .iter()
        .map(|&k| {
            gx.iter()
                .zip(gw)
                .map(|(&t, &w)| {
                    let (u, g) = kernel_at(x, k, FRAC_PI_2 * t);
                    (u, FRAC_PI_2 * w * g)
                })
                .collect()
        })
        .collect();
    fn rec(axes: &[Vec<(f64, f64)>], level: usize, us: &mut Vec<f64>, acc: f64) -> f64 {
        if level == axes.len() {
            return acc;
        }
        let mut s = 0.0;
        for &(u, w) in &axes[level] {
            // intervals are sorted, so every difference is non-negative
            let mut v = 1.0;
            for &ur in us.iter() {
                v *= u - ur;
            }
            us.push(u);
            s += rec(axes, level + 1, us, acc * w * v);
            us.pop();
        }
        s
    }
    if axes.is_empty() {
        return 1.0;
    }
    axes[0]
        .par_iter()
        .map(|&(u, w)| {
            let mut us = vec![u];
            rec(&axes, 1, &mut us, w)
        })
        .sum()
}

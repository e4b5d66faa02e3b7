//! Euler–Maruyama simulation of Loewner driving processes with the drift
//! `8 d/dx_i log F` (or `log Z`), and a martingale check for crossing
//! probabilities along the resulting chains.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coulomb::{crossing_prob, dlog, CoulombError, Target};
use crate::linkpat::{meander_entry, LinkPattern};
use crate::quad::Config;

/// Default proximity at which a chain is stopped, relative to the initial gap.
pub const EPS_STOP: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum LoewnerError {
    #[error("time step must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("start index {0} outside 1..={1}")]
    BadIndex(usize, usize),
    #[error("drift evaluation failed at t={t}, W={w}, V={v:?}: {source}")]
    Drift {
        t: f64,
        w: f64,
        v: Vec<f64>,
        #[source]
        source: CoulombError,
    },
    #[error("patterns {0} and {1} do not form a single meander loop")]
    Incompatible(LinkPattern, LinkPattern),
    #[error(transparent)]
    Coulomb(#[from] CoulombError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub t: f64,
    pub w: f64,
    /// Spectators in their original order, with the driving point removed.
    pub v: Vec<f64>,
    pub swallowed: Vec<bool>,
}

impl ChainState {
    fn initial(x: &Config, i: usize) -> Self {
        let mut v = x.points().to_vec();
        let w = v.remove(i - 1);
        let n = v.len();
        Self { t: 0.0, w, v, swallowed: vec![false; n] }
    }

    /// Marked points with the driving value back at position `i`.
    pub fn config(&self, i: usize) -> Option<Config> {
        let mut pts = self.v.clone();
        pts.insert(i - 1, self.w);
        Config::new(pts).ok()
    }

    /// Distance from `W` to its nearest spectators.
    pub fn gap(&self, i: usize) -> f64 {
        let left = if i >= 2 { self.w - self.v[i - 2] } else { f64::INFINITY };
        let right = if i <= self.v.len() { self.v[i - 1] - self.w } else { f64::INFINITY };
        left.min(right)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    Horizon,
    NearSwallow,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DrivingPath {
    pub dt: f64,
    pub seed: u64,
    pub index: usize,
    pub states: Vec<ChainState>,
    pub stop: StopReason,
}

impl DrivingPath {
    pub fn last(&self) -> &ChainState {
        self.states.last().expect("a path has at least its initial state")
    }
}

/// `8 d/dx_i log(target)` at `x`.
pub fn drift(target: &Target, x: &Config, i: usize) -> Result<f64, CoulombError> {
    Ok(8.0 * dlog(target, x, i)?)
}

/// Exact spectator flow with a frozen driving value.
pub fn spectator_flow(v0: f64, w: f64, t: f64) -> f64 {
    w + (v0 - w).signum() * ((v0 - w).powi(2) + 4.0 * t).sqrt()
}

#[derive(Clone, Copy, Debug)]
pub struct SimParams {
    pub dt: f64,
    pub horizon: f64,
    pub eps_stop: f64,
}

impl SimParams {
    pub fn new(dt: f64, horizon: f64) -> Self {
        Self { dt, horizon, eps_stop: EPS_STOP }
    }
}

pub fn simulate(x: &Config, i: usize, target: &Target, params: SimParams, seed: u64) -> Result<DrivingPath, LoewnerError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut path = simulate_with(x, i, target, params, &mut rng)?;
    path.seed = seed;
    Ok(path)
}

/// Runs the chain with an explicit generator.
pub fn simulate_with<R: Rng>(
    x: &Config,
    i: usize,
    target: &Target,
    params: SimParams,
    rng: &mut R,
) -> Result<DrivingPath, LoewnerError> {
    if !(params.dt > 0.0 && params.dt.is_finite()) {
        return Err(LoewnerError::BadStep(params.dt));
    }
    if i == 0 || i > x.len() {
        return Err(LoewnerError::BadIndex(i, x.len()));
    }
    let mut state = ChainState::initial(x, i);
    let gap0 = state.gap(i);
    let mut states = vec![state.clone()];
    let stop = loop {
        let gap = state.gap(i);
        if gap < params.eps_stop * gap0 {
            break StopReason::NearSwallow;
        }
        if state.t >= params.horizon {
            break StopReason::Horizon;
        }
        let cfg = state.config(i).ok_or_else(|| LoewnerError::Drift {
            t: state.t,
            w: state.w,
            v: state.v.clone(),
            source: CoulombError::MappedOrder,
        })?;
        let b = drift(target, &cfg, i).map_err(|source| LoewnerError::Drift {
            t: state.t,
            w: state.w,
            v: state.v.clone(),
            source,
        })?;
        let xi: f64 = rng.sample(StandardNormal);
        let mut h = (params.dt * (gap / gap0).powi(2).min(1.0)).min(params.horizon - state.t);
        // shrink the step until the driving value stays between its neighbours
        let next = loop {
            let w = state.w + 8f64.sqrt() * h.sqrt() * xi + b * h;
            let v: Vec<f64> = state.v.iter().map(|&vj| vj + 2.0 * h / (vj - state.w)).collect();
            let cand = ChainState { t: state.t + h, w, v, swallowed: state.swallowed.clone() };
            if cand.gap(i) > 0.0 && cand.config(i).is_some() {
                break Some(cand);
            }
            h *= 0.25;
            if h < 1e-12 * params.dt {
                break None;
            }
        };
        match next {
            Some(s) => {
                state = s;
                states.push(state.clone());
            }
            None => break StopReason::NearSwallow,
        }
    };
    Ok(DrivingPath { dt: params.dt, seed: 0, index: i, states, stop })
}

/// Summary of the increments `M_stop - M_0` of `Z_alpha / F_beta`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MartingaleStat {
    pub n_paths: usize,
    pub m0: f64,
    pub mean_increment: f64,
    pub std_error: f64,
    pub min_value: f64,
    pub max_value: f64,
    pub near_swallow: usize,
    pub mean_steps: f64,
}

impl MartingaleStat {
    /// Whether the mean increment is within `k` standard errors of zero.
    pub fn consistent(&self, k: f64) -> bool {
        self.mean_increment.abs() <= k * self.std_error
    }
}

/// Simulates `n_paths` chains under the `F_beta` drift from point `i` and
/// reports the mean increment of the crossing probability of `alpha`.
/// Path `p` uses generator stream `p` of `seed`.
pub fn martingale_check(
    x: &Config,
    i: usize,
    beta: &LinkPattern,
    alpha: &LinkPattern,
    n_paths: usize,
    params: SimParams,
    seed: u64,
) -> Result<MartingaleStat, LoewnerError> {
    if !meander_entry(alpha, beta) {
        return Err(LoewnerError::Incompatible(alpha.clone(), beta.clone()));
    }
    let target = Target::F(beta.clone());
    let m0 = crossing_prob(alpha, beta, x)?;
    let results: Vec<Result<(f64, bool, usize), LoewnerError>> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(p as u64);
            let path = simulate_with(x, i, &target, params, &mut rng)?;
            let last = path.last();
            let cfg = last.config(i).ok_or(CoulombError::MappedOrder)?;
            let m = crossing_prob(alpha, beta, &cfg)?;
            Ok((m, path.stop == StopReason::NearSwallow, path.states.len() - 1))
        })
        .collect();
    let mut ms = Vec::with_capacity(n_paths);
    let mut near = 0;
    let mut steps = 0;
    for r in results {
        let (m, swallowed, s) = r?;
        ms.push(m);
        near += usize::from(swallowed);
        steps += s;
    }
    let n = ms.len() as f64;
    let mean = ms.iter().sum::<f64>() / n;
    let var = ms.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok(MartingaleStat {
        n_paths,
        m0,
        mean_increment: mean - m0,
        std_error: (var / n).sqrt(),
        min_value: ms.iter().copied().fold(f64::INFINITY, f64::min),
        max_value: ms.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        near_swallow: near,
        mean_steps: steps as f64 / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_link_drift() {
        let beta: LinkPattern = "1-2".parse().unwrap();
        let t = Target::F(beta);
        for &(w, v) in &[(0.0, 1.0), (-2.5, 0.3), (1.0, 1.01)] {
            let d = drift(&t, &Config::new(vec![w, v]).unwrap(), 1).unwrap();
            let exact = 2.0 / (w - v);
            assert!((d - exact).abs() <= 1e-8 * exact.abs(), "{d} vs {exact}");
        }
    }

    #[test]
    fn spectator_closed_form() {
        assert!((spectator_flow(1.0, 0.0, 0.0) - 1.0).abs() < 1e-15);
        assert!((spectator_flow(-3.0, 1.0, 2.0) - (1.0 - 24f64.sqrt())).abs() < 1e-14);
    }

    #[test]
    fn reproducible_paths() {
        let x = Config::new(vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let t = Target::F("1-4,2-3".parse().unwrap());
        let p = SimParams::new(1e-3, 0.01);
        let a = simulate(&x, 1, &t, p, 5).unwrap();
        let b = simulate(&x, 1, &t, p, 5).unwrap();
        assert_eq!(a.states, b.states);
        assert_eq!(a.stop, StopReason::Horizon);
        let last = a.last();
        assert!((last.t - 0.01).abs() < 1e-15);
        assert!(last.w < last.v[0]);
    }

    #[test]
    fn deterministic_pattern_is_constant() {
        let x = Config::new(vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let beta: LinkPattern = "1-2,3-4".parse().unwrap();
        let alpha: LinkPattern = "1-4,2-3".parse().unwrap();
        let s = martingale_check(&x, 1, &beta, &alpha, 8, SimParams::new(2e-3, 0.02), 3).unwrap();
        assert!(s.mean_increment.abs() < 1e-9 && (s.m0 - 1.0).abs() < 1e-9);
    }
}

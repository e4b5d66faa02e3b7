//! Discrete harmonic observable on the dual lattice and its Monte Carlo estimate.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{lattice::DualNode, right_free_arcs, run_workers, wilson_interval, EdgeKind, UstError, WiredGraph};
use crate::linkpat::{Dsu, LinkPattern};

/// Discrete harmonic function on the faces of the polygon.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ObservableField {
    pub w: usize,
    pub h: usize,
    /// Values on faces, row-major from the bottom-left face.
    pub values: Vec<f64>,
    /// Value taken by every free arc (entry 0 unused).
    pub arc_values: Vec<f64>,
    /// Largest absolute residual of the linear system, including the
    /// zero-flux rows of floating arcs.
    pub residual: f64,
    pub iterations: usize,
}

impl ObservableField {
    pub fn face(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.w + i]
    }

    /// Bilinear interpolation between face centres at lattice position `(x, y)`.
    pub fn interpolate(&self, x: f64, y: f64) -> f64 {
        let fx = (x - 0.5).clamp(0.0, (self.w - 1) as f64);
        let fy = (y - 0.5).clamp(0.0, (self.h - 1) as f64);
        let (i0, j0) = (fx.floor() as usize, fy.floor() as usize);
        let (i1, j1) = ((i0 + 1).min(self.w - 1), (j0 + 1).min(self.h - 1));
        let (tx, ty) = (fx - i0 as f64, fy - j0 as f64);
        let a = self.face(i0, j0) * (1.0 - tx) + self.face(i1, j0) * tx;
        let b = self.face(i0, j1) * (1.0 - tx) + self.face(i1, j1) * tx;
        a * (1.0 - ty) + b * ty
    }
}

enum Slot {
    Free(usize),
    Fixed(f64),
}

/// Solves for the harmonic function equal to 0 on free arc `N`, 1 on the
/// other free arcs sharing its region of `beta`, with reflecting wired arcs
/// and every other region's free arcs held at a common unknown value
/// carrying zero net flux.
pub fn solve_observable(g: &WiredGraph) -> Result<ObservableField, UstError> {
    let poly = &g.poly;
    let n = poly.n_links();
    let regions = g.beta.boundary_regions();
    let last = regions[2 * n];
    let n_faces = poly.n_faces();
    let mut floating: HashMap<usize, usize> = HashMap::new();
    let mut arc_slot = Vec::with_capacity(n + 1);
    arc_slot.push(Slot::Fixed(f64::NAN));
    for k in 1..=n {
        let r = regions[2 * k];
        arc_slot.push(if k == n {
            Slot::Fixed(0.0)
        } else if r == last {
            Slot::Fixed(1.0)
        } else {
            let next = n_faces + floating.len();
            Slot::Free(*floating.entry(r).or_insert(next))
        });
    }
    let dim = n_faces + floating.len();
    let slot = |d: DualNode| -> Result<Slot, UstError> {
        match d {
            DualNode::Face(f) => Ok(Slot::Free(f)),
            DualNode::Outer(k) => Ok(match arc_slot[k] {
                Slot::Free(i) => Slot::Free(i),
                Slot::Fixed(v) => Slot::Fixed(v),
            }),
            DualNode::Beyond(_) => Err(UstError::Invariant("dual edge leaves the polygon".into())),
        }
    };
    let mut diag = vec![0.0; dim];
    let mut rhs = vec![0.0; dim];
    let mut off: Vec<Vec<usize>> = vec![Vec::new(); dim];
    for e in 0..poly.edges.len() {
        if matches!(poly.kind[e], EdgeKind::Wired(_)) {
            continue;
        }
        let (a, b) = poly.dual_ends(e);
        match (slot(a)?, slot(b)?) {
            (Slot::Free(i), Slot::Free(j)) => {
                diag[i] += 1.0;
                diag[j] += 1.0;
                off[i].push(j);
                off[j].push(i);
            }
            (Slot::Free(i), Slot::Fixed(v)) | (Slot::Fixed(v), Slot::Free(i)) => {
                diag[i] += 1.0;
                rhs[i] += v;
            }
            (Slot::Fixed(_), Slot::Fixed(_)) => {}
        }
    }
    let apply = |u: &[f64], out: &mut [f64]| {
        for i in 0..dim {
            let mut s = diag[i] * u[i];
            for &j in &off[i] {
                s -= u[j];
            }
            out[i] = s;
        }
    };
    let (u, iterations) = conjugate_gradient(dim, &diag, &rhs, apply, 1e-13)?;
    let mut au = vec![0.0; dim];
    apply(&u, &mut au);
    let residual = au.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if residual >= 1e-10 {
        return Err(UstError::NoConvergence(residual));
    }
    let arc_values = arc_slot
        .iter()
        .map(|s| match s {
            Slot::Fixed(v) => *v,
            Slot::Free(i) => u[*i],
        })
        .collect();
    Ok(ObservableField { w: poly.w, h: poly.h, values: u[..n_faces].to_vec(), arc_values, residual, iterations })
}

/// Jacobi-preconditioned conjugate gradients, stopping once the residual
/// max-norm falls below `tol * max(1, |rhs|_inf)`.
fn conjugate_gradient(
    dim: usize,
    diag: &[f64],
    rhs: &[f64],
    apply: impl Fn(&[f64], &mut [f64]),
    tol: f64,
) -> Result<(Vec<f64>, usize), UstError> {
    let scale = rhs.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut x = vec![0.0; dim];
    let mut r = rhs.to_vec();
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(a, d)| a / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; dim];
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let max_iter = 20 * dim + 100;
    for it in 0..max_iter {
        let rmax = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if rmax <= tol * scale {
            return Ok((x, it));
        }
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        let alpha = rz / pap;
        for i in 0..dim {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..dim {
            z[i] = r[i] / diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..dim {
            p[i] = z[i] + beta * p[i];
        }
    }
    let rmax = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Err(UstError::NoConvergence(rmax))
}

/// Monte Carlo frequencies of probe faces lying to the right of the
/// exploration path.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ObservableEstimate {
    pub samples: u64,
    pub probes: Vec<usize>,
    pub right: Vec<u64>,
}

impl ObservableEstimate {
    pub fn frequency(&self, i: usize) -> f64 {
        self.right[i] as f64 / self.samples as f64
    }

    pub fn interval(&self, i: usize) -> (f64, f64) {
        wilson_interval(self.right[i], self.samples)
    }

    /// Binomial standard error of probe `i`.
    pub fn std_error(&self, i: usize) -> f64 {
        let p = self.frequency(i);
        (p * (1.0 - p) / self.samples as f64).sqrt()
    }
}

/// For every sample, each probe face inherits the side of the free arcs
/// in its dual cluster.
pub fn estimate_observable(
    g: &WiredGraph,
    probes: &[usize],
    n_samples: usize,
    seed: u64,
    threads: usize,
) -> Result<ObservableEstimate, UstError> {
    let poly = &g.poly;
    let n = poly.n_links();
    let n_faces = poly.n_faces();
    if let Some(&bad) = probes.iter().find(|&&f| f >= n_faces) {
        return Err(UstError::Degenerate(format!("probe face {bad} outside the polygon")));
    }
    let parts = run_workers(n_samples, seed, threads, |count, rng| {
        let mut right = vec![0u64; probes.len()];
        let mut sides: HashMap<LinkPattern, Vec<bool>> = HashMap::new();
        for _ in 0..count {
            let tree = g.sample_tree(rng);
            let alpha = g.connectivity(&tree)?;
            let side = sides.entry(alpha.clone()).or_insert_with(|| right_free_arcs(&alpha, &g.beta));
            let mut dsu = Dsu::new(n_faces + n + 1);
            let id = |d: DualNode| match d {
                DualNode::Face(f) => f,
                DualNode::Outer(k) => n_faces + k,
                DualNode::Beyond(_) => usize::MAX,
            };
            for e in 0..poly.edges.len() {
                if g.is_primal(&tree, e) {
                    continue;
                }
                let (a, b) = poly.dual_ends(e);
                dsu.union(id(a), id(b));
            }
            let arc_root: Vec<usize> = (1..=n).map(|k| dsu.find(n_faces + k)).collect();
            for (slot, &f) in right.iter_mut().zip(probes) {
                let r = dsu.find(f);
                let mut verdict = None;
                for k in 1..=n {
                    if arc_root[k - 1] == r {
                        match verdict {
                            None => verdict = Some(side[k]),
                            Some(s) if s != side[k] => {
                                return Err(UstError::Invariant(format!("dual cluster of face {f} straddles the path")));
                            }
                            _ => {}
                        }
                    }
                }
                match verdict {
                    Some(true) => *slot += 1,
                    Some(false) => {}
                    None => return Err(UstError::Invariant(format!("dual cluster of face {f} misses the boundary"))),
                }
            }
        }
        Ok(right)
    })?;
    let mut right = vec![0u64; probes.len()];
    for p in parts {
        for (a, b) in right.iter_mut().zip(p) {
            *a += b;
        }
    }
    Ok(ObservableEstimate { samples: n_samples as u64, probes: probes.to_vec(), right })
}

#[cfg(test)]
mod tests {
    use super::super::LatticePolygon;
    use super::*;

    #[test]
    fn two_link_observable_is_linear_in_a_strip() {
        // wired left and right sides, free bottom (arc 1) and top (arc 2)
        let w = 12;
        let h = 6;
        let poly = LatticePolygon::from_grid(w, h, vec![6, 12, 24, 30], 1.0).unwrap();
        let g = WiredGraph::new(poly, "1-2,3-4".parse().unwrap()).unwrap();
        let field = solve_observable(&g).unwrap();
        assert!(field.residual < 1e-10);
        for j in 0..h {
            for i in 0..w {
                let expect = 1.0 - (j as f64 + 1.0) / (h as f64 + 1.0);
                assert!((field.face(i, j) - expect).abs() < 1e-9, "{i},{j}");
            }
        }
    }

    #[test]
    fn floating_arc_has_zero_flux() {
        let poly = LatticePolygon::from_grid(10, 10, vec![3, 8, 14, 20, 26, 32], 0.1).unwrap();
        let g = WiredGraph::new(poly, "1-4,2-3,5-6".parse().unwrap()).unwrap();
        let field = solve_observable(&g).unwrap();
        assert!(field.residual < 1e-10);
        assert!(field.values.iter().all(|v| (-1e-12..=1.0 + 1e-12).contains(v)));
        let v = field.arc_values[1];
        assert!(v > 0.0 && v < 1.0);
    }
}

//! Rectangular lattice polygons with alternating wired and free boundary arcs.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::UstError;
use crate::quad::Config;
use crate::special::{ellip_k, jacobi_sn, modulus_from_ratio};

/// Directions in counterclockwise order.
pub const EAST: usize = 0;
pub const NORTH: usize = 1;
pub const WEST: usize = 2;
pub const SOUTH: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeKind {
    Interior,
    /// Boundary edge on wired arc `i` (1-based).
    Wired(usize),
    /// Boundary edge on free arc `k` (1-based, arc `N` wraps through the start).
    Free(usize),
}

/// Continuum description: a `width x height` rectangle and marked boundary
/// points in counterclockwise order starting from the middle of the top side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RectSpec {
    pub width: f64,
    pub height: f64,
    pub marks: Vec<(f64, f64)>,
}

/// Grid `(0..=w) x (0..=h)` with `2N` marked boundary vertices.
#[derive(Clone, Debug)]
pub struct LatticePolygon {
    pub w: usize,
    pub h: usize,
    /// Mesh size.
    pub delta: f64,
    /// Boundary vertices counterclockwise from the top middle.
    pub boundary: Vec<usize>,
    /// Boundary indices of the marked vertices, increasing.
    pub marks: Vec<usize>,
    pub edges: Vec<(usize, usize)>,
    pub adj: Vec<[Option<usize>; 4]>,
    pub kind: Vec<EdgeKind>,
    /// Wired arc of each vertex, if any.
    pub vertex_arc: Vec<Option<usize>>,
}

impl LatticePolygon {
    /// Builds the polygon from integer dimensions and boundary indices of the marks.
    pub fn from_grid(w: usize, h: usize, marks: Vec<usize>, delta: f64) -> Result<Self, UstError> {
        if w < 2 || h < 2 {
            return Err(UstError::Degenerate("grid must be at least 2x2".into()));
        }
        if marks.len() < 2 || marks.len() % 2 != 0 {
            return Err(UstError::Degenerate(format!("need an even number of marks, got {}", marks.len())));
        }
        let vid = |i: usize, j: usize| j * (w + 1) + i;
        let nv = (w + 1) * (h + 1);
        let mut edges = Vec::new();
        let mut adj = vec![[None; 4]; nv];
        for j in 0..=h {
            for i in 0..=w {
                if i < w {
                    let e = edges.len();
                    edges.push((vid(i, j), vid(i + 1, j)));
                    adj[vid(i, j)][EAST] = Some(e);
                    adj[vid(i + 1, j)][WEST] = Some(e);
                }
                if j < h {
                    let e = edges.len();
                    edges.push((vid(i, j), vid(i, j + 1)));
                    adj[vid(i, j)][NORTH] = Some(e);
                    adj[vid(i, j + 1)][SOUTH] = Some(e);
                }
            }
        }
        // counterclockwise from the top middle: left along the top, down, right, up, left
        let mut boundary = Vec::with_capacity(2 * (w + h));
        let mid = w / 2;
        for i in (0..=mid).rev() {
            boundary.push(vid(i, h));
        }
        for j in (0..h).rev() {
            boundary.push(vid(0, j));
        }
        for i in 1..=w {
            boundary.push(vid(i, 0));
        }
        for j in 1..=h {
            boundary.push(vid(w, j));
        }
        for i in (mid + 1..w).rev() {
            boundary.push(vid(i, h));
        }
        let len = boundary.len();
        debug_assert_eq!(len, 2 * (w + h));
        if marks.windows(2).any(|p| p[0] >= p[1]) || *marks.last().unwrap() >= len {
            return Err(UstError::Degenerate("marks must be increasing boundary indices".into()));
        }
        let gaps = marks.windows(2).map(|p| p[1] - p[0]).chain(std::iter::once(len - marks[marks.len() - 1] + marks[0]));
        if gaps.into_iter().any(|g| g < 2) {
            return Err(UstError::Degenerate("every arc needs at least 2 edges".into()));
        }
        let n = marks.len() / 2;
        let mut kind = vec![EdgeKind::Interior; edges.len()];
        let mut vertex_arc = vec![None; nv];
        let edge_between = |a: usize, b: usize| -> usize {
            adj[a].iter().flatten().copied().find(|&e| {
                let (x, y) = edges[e];
                (x == a && y == b) || (x == b && y == a)
            })
            .expect("consecutive boundary vertices are adjacent")
        };
        // free arc N holds boundary edges before marks[0]; assign by the last mark at or before t
        for t in 0..len {
            let e = edge_between(boundary[t], boundary[(t + 1) % len]);
            let r = marks.partition_point(|&m| m <= t); // number of marks at or before t
            kind[e] = if r == 0 || r == 2 * n {
                EdgeKind::Free(n)
            } else if r % 2 == 1 {
                EdgeKind::Wired(r.div_ceil(2))
            } else {
                EdgeKind::Free(r / 2)
            };
        }
        for i in 1..=n {
            for t in marks[2 * i - 2]..=marks[2 * i - 1] {
                vertex_arc[boundary[t]] = Some(i);
            }
        }
        Ok(Self { w, h, delta, boundary, marks, edges, adj, kind, vertex_arc })
    }

    /// Snaps a continuum specification to the grid with mesh `delta`.
    pub fn build(spec: &RectSpec, delta: f64) -> Result<Self, UstError> {
        let w = (spec.width / delta).round() as usize;
        let h = (spec.height / delta).round() as usize;
        let walk = Self::from_grid(w, h, vec![0, 2], delta)?.boundary;
        let mut marks = Vec::new();
        for &(mx, my) in &spec.marks {
            let (gx, gy) = (mx / delta, my / delta);
            let dist = |t: usize| {
                let v = walk[t];
                ((v % (w + 1)) as f64 - gx).hypot((v / (w + 1)) as f64 - gy)
            };
            let best = (0..walk.len()).min_by(|&a, &b| dist(a).total_cmp(&dist(b))).unwrap_or(0);
            marks.push(best);
        }
        Self::from_grid(w, h, marks, delta)
    }

    pub fn n_links(&self) -> usize {
        self.marks.len() / 2
    }

    pub fn n_vertices(&self) -> usize {
        (self.w + 1) * (self.h + 1)
    }

    pub fn n_faces(&self) -> usize {
        self.w * self.h
    }

    pub fn coords(&self, v: usize) -> (usize, usize) {
        (v % (self.w + 1), v / (self.w + 1))
    }

    /// Vertex of the `k`-th mark (1-based).
    pub fn mark_vertex(&self, k: usize) -> usize {
        self.boundary[self.marks[k - 1]]
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.kind[e] != EdgeKind::Interior
    }

    /// The two faces (or free arcs) on either side of edge `e`.
    pub fn dual_ends(&self, e: usize) -> (DualNode, DualNode) {
        let (a, b) = self.edges[e];
        let (ai, aj) = self.coords(a);
        let (_, bj) = self.coords(b);
        let face = |i: isize, j: isize| -> Option<usize> {
            if i >= 0 && j >= 0 && (i as usize) < self.w && (j as usize) < self.h {
                Some(j as usize * self.w + i as usize)
            } else {
                None
            }
        };
        let (f1, f2) = if aj == bj {
            (face(ai as isize, aj as isize - 1), face(ai as isize, aj as isize))
        } else {
            (face(ai as isize - 1, aj as isize), face(ai as isize, aj as isize))
        };
        let outer = match self.kind[e] {
            EdgeKind::Free(k) => DualNode::Outer(k),
            EdgeKind::Wired(i) => DualNode::Beyond(i),
            EdgeKind::Interior => DualNode::Beyond(0),
        };
        (f1.map(DualNode::Face).unwrap_or(outer), f2.map(DualNode::Face).unwrap_or(outer))
    }

    /// Centre of face `f` in lattice units.
    pub fn face_center(&self, f: usize) -> (f64, f64) {
        ((f % self.w) as f64 + 0.5, (f / self.w) as f64 + 0.5)
    }

    pub fn rect_map(&self) -> RectMap {
        RectMap::new(self.w as f64, self.h as f64)
    }

    /// Images of the marked vertices under the map to the half-plane.
    pub fn continuum_points(&self) -> Result<Config, UstError> {
        let map = self.rect_map();
        let pts: Vec<f64> = (1..=self.marks.len())
            .map(|k| {
                let (i, j) = self.coords(self.mark_vertex(k));
                map.to_half_plane(i as f64, j as f64).re
            })
            .collect();
        Config::new(pts).map_err(|e| UstError::Degenerate(format!("marked points: {e}")))
    }
}

/// A vertex of the dual graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DualNode {
    Face(usize),
    /// Outer vertex of free arc `k`.
    Outer(usize),
    /// Beyond a wired arc: not part of the dual graph.
    Beyond(usize),
}

/// Conformal map from the rectangle `[0, w] x [0, h]` onto the upper
/// half-plane sending the middle of the top side to infinity.
#[derive(Clone, Copy, Debug)]
pub struct RectMap {
    pub w: f64,
    pub h: f64,
    pub k: f64,
    pub kk: f64,
    pub kp: f64,
}

impl RectMap {
    pub fn new(w: f64, h: f64) -> Self {
        let k = modulus_from_ratio(2.0 * h / w);
        let m = k * k;
        Self { w, h, k, kk: ellip_k(m), kp: ellip_k(1.0 - m) }
    }

    pub fn to_half_plane(&self, x: f64, y: f64) -> Complex64 {
        let zeta = Complex64::new(self.kk * (2.0 * x / self.w - 1.0), self.kp * y / self.h);
        let s = jacobi_sn(zeta, self.k);
        Complex64::new(s.re, s.im.max(0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_walk_is_ccw_from_top_middle() {
        let p = LatticePolygon::from_grid(4, 2, vec![1, 3, 6, 9], 0.25).unwrap();
        assert_eq!(p.boundary.len(), 12);
        assert_eq!(p.coords(p.boundary[0]), (2, 2));
        assert_eq!(p.coords(p.boundary[2]), (0, 2));
        assert_eq!(p.coords(p.boundary[4]), (0, 0));
        assert_eq!(p.coords(p.boundary[8]), (4, 0));
        assert_eq!(p.coords(p.boundary[11]), (3, 2));
    }

    #[test]
    fn arcs_alternate() {
        let p = LatticePolygon::from_grid(10, 10, vec![5, 15, 25, 35], 0.1).unwrap();
        let mut counts = [0usize; 5];
        for k in &p.kind {
            match k {
                EdgeKind::Wired(1) => counts[0] += 1,
                EdgeKind::Free(1) => counts[1] += 1,
                EdgeKind::Wired(2) => counts[2] += 1,
                EdgeKind::Free(2) => counts[3] += 1,
                EdgeKind::Interior => counts[4] += 1,
                _ => unreachable!(),
            }
        }
        assert_eq!(&counts[..4], &[10, 10, 10, 10]);
        assert_eq!(counts[4], 2 * 10 * 11 - 40);
    }

    #[test]
    fn rejects_short_arcs() {
        assert!(LatticePolygon::from_grid(4, 4, vec![1, 2, 5, 9], 0.25).is_err());
        assert!(LatticePolygon::from_grid(4, 4, vec![0, 2, 5, 15], 0.25).is_err());
    }

    #[test]
    fn rect_map_orders_boundary() {
        let p = LatticePolygon::from_grid(8, 8, vec![2, 6, 12, 18, 22, 28], 0.125).unwrap();
        let x = p.continuum_points().unwrap();
        assert_eq!(x.len(), 6);
        let m = p.rect_map();
        let c = m.to_half_plane(4.0, 4.0);
        assert!(c.im > 0.0);
        // bottom corners go to -1 and 1
        assert!((m.to_half_plane(0.0, 0.0).re + 1.0).abs() < 1e-12);
        assert!((m.to_half_plane(8.0, 0.0).re - 1.0).abs() < 1e-12);
    }
}

//! Uniform spanning trees on lattice rectangles with wired boundary arcs.
//!
//! Wired arcs are contracted and then glued together following the
//! partition associated with the boundary condition `beta`. Trees are
//! sampled with Wilson's algorithm; Peano curves are contour walks that
//! separate the tree from its dual.

mod lattice;
mod observable;

pub use lattice::{DualNode, EdgeKind, LatticePolygon, RectMap, RectSpec, EAST, NORTH, SOUTH, WEST};
pub use observable::{estimate_observable, solve_observable, ObservableEstimate, ObservableField};

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linkpat::{meander_entry, partition_to_pattern, pattern_to_partition, Dsu, LinkError, LinkPattern, NonCrossingPartition};

#[derive(Debug, Error)]
pub enum UstError {
    #[error("degenerate polygon: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error("pattern has {0} links but the polygon has {1} wired arcs")]
    SizeMismatch(usize, usize),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("linear solver stalled at residual {0:e}")]
    NoConvergence(f64),
    #[error("thread pool: {0}")]
    Pool(String),
}

/// Lattice polygon with wired arcs contracted according to `beta`.
#[derive(Clone, Debug)]
pub struct WiredGraph {
    pub poly: LatticePolygon,
    pub beta: LinkPattern,
    /// Contracted node of every vertex.
    pub node_of: Vec<u32>,
    pub n_nodes: usize,
    /// Node of wired arc 1.
    pub root: usize,
    offsets: Vec<u32>,
    nbrs: Vec<(u32, u32)>,
}

impl WiredGraph {
    pub fn new(poly: LatticePolygon, beta: LinkPattern) -> Result<Self, UstError> {
        let n = poly.n_links();
        if beta.n() != n {
            return Err(UstError::SizeMismatch(beta.n(), n));
        }
        let partition = pattern_to_partition(&beta);
        let block_of = partition.block_of();
        let n_blocks = partition.blocks().len();
        let mut node_of = vec![u32::MAX; poly.n_vertices()];
        let mut next = n_blocks as u32;
        for v in 0..poly.n_vertices() {
            node_of[v] = match poly.vertex_arc[v] {
                Some(i) => block_of[i] as u32,
                None => {
                    next += 1;
                    next - 1
                }
            };
        }
        let n_nodes = next as usize;
        let mut deg = vec![0u32; n_nodes + 1];
        let mut pairs = Vec::with_capacity(poly.edges.len());
        for (e, &(a, b)) in poly.edges.iter().enumerate() {
            let (na, nb) = (node_of[a], node_of[b]);
            if na == nb {
                if !matches!(poly.kind[e], EdgeKind::Wired(_)) {
                    return Err(UstError::Degenerate(format!("edge {e} joins two wired vertices of one block")));
                }
                continue;
            }
            deg[na as usize] += 1;
            deg[nb as usize] += 1;
            pairs.push((na, nb, e as u32));
        }
        let mut offsets = vec![0u32; n_nodes + 1];
        for v in 0..n_nodes {
            offsets[v + 1] = offsets[v] + deg[v];
        }
        let mut fill = offsets.clone();
        let mut nbrs = vec![(0u32, 0u32); offsets[n_nodes] as usize];
        for (a, b, e) in pairs {
            nbrs[fill[a as usize] as usize] = (b, e);
            fill[a as usize] += 1;
            nbrs[fill[b as usize] as usize] = (a, e);
            fill[b as usize] += 1;
        }
        let root = block_of[1];
        Ok(Self { poly, beta, node_of, n_nodes, root, offsets, nbrs })
    }

    /// Whether edge `e` belongs to the tree or is a contracted wired edge.
    #[inline]
    pub fn is_primal(&self, tree: &TreeSample, e: usize) -> bool {
        tree.edges[e] || matches!(self.poly.kind[e], EdgeKind::Wired(_))
    }

    /// Samples a uniform spanning tree of the contracted graph.
    pub fn sample_tree<R: Rng>(&self, rng: &mut R) -> TreeSample {
        let mut in_tree = vec![false; self.n_nodes];
        let mut next: Vec<(u32, u32)> = vec![(u32::MAX, u32::MAX); self.n_nodes];
        let mut edges = vec![false; self.poly.edges.len()];
        in_tree[self.root] = true;
        for start in 0..self.n_nodes {
            let mut u = start;
            while !in_tree[u] {
                let (lo, hi) = (self.offsets[u] as usize, self.offsets[u + 1] as usize);
                let pick = self.nbrs[rng.random_range(lo..hi)];
                next[u] = pick;
                u = pick.0 as usize;
            }
            let mut u = start;
            while !in_tree[u] {
                in_tree[u] = true;
                let (v, e) = next[u];
                edges[e as usize] = true;
                u = v as usize;
            }
        }
        TreeSample { edges }
    }

    /// Partition of the wired arcs into classes joined by tree paths inside the polygon.
    pub fn internal_partition(&self, tree: &TreeSample) -> Result<NonCrossingPartition, UstError> {
        let poly = &self.poly;
        let mut dsu = Dsu::new(poly.n_vertices());
        for (e, &(a, b)) in poly.edges.iter().enumerate() {
            if self.is_primal(tree, e) {
                dsu.union(a, b);
            }
        }
        let n = poly.n_links();
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 1..=n {
            groups.entry(dsu.find(poly.mark_vertex(2 * i - 1))).or_default().push(i);
        }
        Ok(NonCrossingPartition::new(n, groups.into_values().collect())?)
    }

    /// Connectivity pattern of the Peano curves, read off the tree.
    pub fn connectivity(&self, tree: &TreeSample) -> Result<LinkPattern, UstError> {
        let alpha = partition_to_pattern(&self.internal_partition(tree)?);
        if !meander_entry(&alpha, &self.beta) {
            return Err(UstError::Invariant(format!("connectivity {alpha} does not close into one loop with {}", self.beta)));
        }
        Ok(alpha)
    }
}

/// Edge set of a sampled spanning tree, indexed by lattice edge.
#[derive(Clone, Debug)]
pub struct TreeSample {
    pub edges: Vec<bool>,
}

impl TreeSample {
    pub fn n_edges(&self) -> usize {
        self.edges.iter().filter(|&&b| b).count()
    }
}

/// One Peano curve as the sequence of corners `(vertex, starting direction)`
/// it sweeps, turning clockwise around each vertex.
#[derive(Clone, Debug)]
pub struct PeanoCurve {
    pub start: usize,
    pub end: usize,
    pub sectors: Vec<(u32, u8)>,
}

#[derive(Clone, Debug)]
pub struct PeanoSet {
    pub curves: Vec<PeanoCurve>,
    pub connectivity: LinkPattern,
}

#[inline]
fn cw_next(adj: &[Option<usize>; 4], d: usize) -> (usize, usize) {
    let mut d2 = (d + 3) % 4;
    let mut steps = 1;
    while adj[d2].is_none() {
        d2 = (d2 + 3) % 4;
        steps += 1;
    }
    (d2, steps)
}

/// Whether the corner of `v` starting at direction `d` lies outside the polygon.
pub fn is_outer_sector(poly: &LatticePolygon, v: usize, d: usize) -> bool {
    let adj = &poly.adj[v];
    let Some(e1) = adj[d] else { return false };
    let (d2, steps) = cw_next(adj, d);
    steps > 1 && poly.is_boundary_edge(e1) && poly.is_boundary_edge(adj[d2].unwrap())
}

/// Traces the `N` Peano curves starting at the odd marks.
pub fn peano_curves(g: &WiredGraph, tree: &TreeSample) -> Result<PeanoSet, UstError> {
    let poly = &g.poly;
    let n = poly.n_links();
    let cap = 4 * poly.n_vertices() + 16;
    let mut used = vec![false; 4 * poly.n_vertices()];
    let mut curves = Vec::with_capacity(n);
    let mut pairs = Vec::with_capacity(n);
    for i in 1..=n {
        let start = 2 * i - 1;
        let mut v = poly.mark_vertex(start);
        let t = poly.marks[start - 1];
        let wired_edge = poly.adj[v]
            .iter()
            .flatten()
            .copied()
            .find(|&e| {
                let (a, b) = poly.edges[e];
                let nxt = poly.boundary[(t + 1) % poly.boundary.len()];
                (a == v && b == nxt) || (b == v && a == nxt)
            })
            .ok_or_else(|| UstError::Invariant("mark without wired edge".into()))?;
        let mut back = (0..4).find(|&d| poly.adj[v][d] == Some(wired_edge)).unwrap();
        let mut sectors = Vec::new();
        let end = loop {
            if sectors.len() > cap {
                return Err(UstError::Invariant(format!("Peano curve from {start} does not terminate")));
            }
            let slot = 4 * v + back;
            if used[slot] {
                return Err(UstError::Invariant(format!("corner ({v},{back}) swept twice")));
            }
            used[slot] = true;
            sectors.push((v as u32, back as u8));
            let adj = &poly.adj[v];
            let (d2, steps) = cw_next(adj, back);
            let f = adj[d2].unwrap();
            let outer = steps > 1 && poly.is_boundary_edge(adj[back].unwrap()) && poly.is_boundary_edge(f);
            if outer && matches!(poly.kind[f], EdgeKind::Wired(_)) {
                let j = poly.vertex_arc[v].unwrap();
                if poly.mark_vertex(2 * j) != v {
                    return Err(UstError::Invariant(format!("curve from {start} left through the outside of arc {j}")));
                }
                break 2 * j;
            }
            if g.is_primal(tree, f) {
                let (a, b) = poly.edges[f];
                v = if a == v { b } else { a };
                back = (d2 + 2) % 4;
            } else {
                back = d2;
            }
        };
        pairs.push((start, end));
        curves.push(PeanoCurve { start, end, sectors });
    }
    let connectivity = LinkPattern::new(&pairs)?;
    if !meander_entry(&connectivity, &g.beta) {
        return Err(UstError::Invariant(format!("Peano connectivity {connectivity} is not compatible with {}", g.beta)));
    }
    Ok(PeanoSet { curves, connectivity })
}

/// Checks that the curves sweep every corner exactly once, except the outer
/// corners of wired vertices other than the marks.
pub fn check_sector_cover(poly: &LatticePolygon, set: &PeanoSet) -> Result<(), UstError> {
    let mut count = vec![0u8; 4 * poly.n_vertices()];
    for c in &set.curves {
        for &(v, d) in &c.sectors {
            count[4 * v as usize + d as usize] += 1;
        }
    }
    let marks: std::collections::HashSet<usize> = (1..=poly.marks.len()).map(|k| poly.mark_vertex(k)).collect();
    for v in 0..poly.n_vertices() {
        for d in 0..4 {
            if poly.adj[v][d].is_none() {
                continue;
            }
            let skip = is_outer_sector(poly, v, d) && poly.vertex_arc[v].is_some() && !marks.contains(&v);
            let expect = u8::from(!skip);
            if count[4 * v + d] != expect {
                return Err(UstError::Invariant(format!("corner ({v},{d}) swept {} times", count[4 * v + d])));
            }
        }
    }
    Ok(())
}

/// Chain of Peano curves and external links from mark 1 to mark `2N`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExplorationPath {
    /// Marks in the order visited.
    pub marks: Vec<usize>,
    /// Starting marks of the Peano curves used.
    pub curves: Vec<usize>,
    /// Total number of corners swept.
    pub steps: usize,
}

pub fn exploration_path(set: &PeanoSet, beta: &LinkPattern) -> Result<ExplorationPath, UstError> {
    let n2 = 2 * beta.n();
    let pa = set.connectivity.partner();
    let pb = beta.partner();
    let mut marks = vec![1];
    let mut curves = Vec::new();
    let mut steps = 0;
    let mut at = 1;
    loop {
        let c = set.curves.iter().find(|c| c.start == at).ok_or_else(|| UstError::Invariant(format!("no curve starts at {at}")))?;
        curves.push(at);
        steps += c.sectors.len();
        at = pa[at];
        marks.push(at);
        if at == n2 {
            break;
        }
        at = pb[at];
        marks.push(at);
        if curves.len() > beta.n() {
            return Err(UstError::Invariant("exploration path does not reach the last mark".into()));
        }
    }
    Ok(ExplorationPath { marks, curves, steps })
}

/// For each free arc `k` (index `k`, entry 0 unused), whether it lies to
/// the right of the exploration path determined by `alpha` and `beta`.
///
/// The marks are placed on the unit circle, links of `alpha` are drawn as
/// chords and links of `beta` outside the disc; the path is closed along
/// the boundary from mark `2N` to mark 1.
pub fn right_free_arcs(alpha: &LinkPattern, beta: &LinkPattern) -> Vec<bool> {
    let n = beta.n();
    let n2 = 2 * n;
    let angle = |k: usize| std::f64::consts::TAU * (k as f64 - 0.5) / n2 as f64;
    let at = |r: f64, t: f64| (r * t.cos(), r * t.sin());
    let pa = alpha.partner();
    let pb = beta.partner();
    // radius of the outside drawing of a beta link grows with its nesting
    let depth = |a: usize, b: usize| beta.links().iter().filter(|&&(c, d)| a < c && d < b).count();
    let mut path = vec![at(1.0, angle(1))];
    let mut k = 1;
    loop {
        let e = pa[k];
        path.push(at(1.0, angle(e)));
        if e == n2 {
            break;
        }
        let o = pb[e];
        let (lo, hi) = (e.min(o), e.max(o));
        let r = 1.2 + 0.1 * depth(lo, hi) as f64;
        let (t0, t1) = (angle(e), angle(o));
        path.push(at(r, t0));
        for s in 1..64 {
            path.push(at(r, t0 + (t1 - t0) * s as f64 / 64.0));
        }
        path.push(at(r, t1));
        path.push(at(1.0, t1));
        k = o;
    }
    let (t0, t1) = (angle(n2), angle(1) + std::f64::consts::TAU);
    for s in 1..64 {
        path.push(at(1.0, t0 + (t1 - t0) * s as f64 / 64.0));
    }
    let winding = |p: (f64, f64)| -> i64 {
        let mut total = 0.0;
        for w in 0..path.len() {
            let a = path[w];
            let b = path[(w + 1) % path.len()];
            let th_a = (a.1 - p.1).atan2(a.0 - p.0);
            let th_b = (b.1 - p.1).atan2(b.0 - p.0);
            let mut d = th_b - th_a;
            while d > std::f64::consts::PI {
                d -= std::f64::consts::TAU;
            }
            while d < -std::f64::consts::PI {
                d += std::f64::consts::TAU;
            }
            total += d;
        }
        (total / std::f64::consts::TAU).round() as i64
    };
    let probe = |k: usize| {
        let t = if k == n { 0.5 * (angle(n2) + angle(1) + std::f64::consts::TAU) } else { 0.5 * (angle(2 * k) + angle(2 * k + 1)) };
        winding(at(0.999, t))
    };
    let reference = probe(n);
    let mut out = vec![false; n + 1];
    for (k, slot) in out.iter_mut().enumerate().skip(1) {
        *slot = probe(k) != reference;
    }
    out
}

/// Splits `n_samples` over `threads` workers, each with its own generator
/// seeded by `seed ^ worker`, and returns the per-worker results in order.
pub(crate) fn run_workers<T, F>(n_samples: usize, seed: u64, threads: usize, work: F) -> Result<Vec<T>, UstError>
where
    T: Send,
    F: Fn(usize, &mut ChaCha8Rng) -> Result<T, UstError> + Sync,
{
    let threads = threads.max(1);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| UstError::Pool(e.to_string()))?;
    pool.install(|| {
        (0..threads)
            .into_par_iter()
            .map(|w| {
                let count = n_samples / threads + usize::from(w < n_samples % threads);
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ w as u64);
                work(count, &mut rng)
            })
            .collect()
    })
}

/// Counts of sampled connectivity patterns.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CrossingCounts {
    pub samples: u64,
    pub counts: BTreeMap<LinkPattern, u64>,
}

impl CrossingCounts {
    pub fn count(&self, alpha: &LinkPattern) -> u64 {
        self.counts.get(alpha).copied().unwrap_or(0)
    }

    pub fn frequency(&self, alpha: &LinkPattern) -> f64 {
        self.count(alpha) as f64 / self.samples as f64
    }

    /// 95% Wilson score interval.
    pub fn interval(&self, alpha: &LinkPattern) -> (f64, f64) {
        wilson_interval(self.count(alpha), self.samples)
    }
}

pub fn wilson_interval(k: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let nf = n as f64;
    let p = k as f64 / nf;
    let den = 1.0 + z * z / nf;
    let c = (p + z * z / (2.0 * nf)) / den;
    let half = z * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt() / den;
    ((c - half).max(0.0), (c + half).min(1.0))
}

/// Monte Carlo estimate of the connectivity distribution.
pub fn mc_crossing(g: &WiredGraph, n_samples: usize, seed: u64, threads: usize) -> Result<CrossingCounts, UstError> {
    let parts = run_workers(n_samples, seed, threads, |count, rng| {
        let mut local: BTreeMap<LinkPattern, u64> = BTreeMap::new();
        for _ in 0..count {
            let tree = g.sample_tree(rng);
            *local.entry(g.connectivity(&tree)?).or_default() += 1;
        }
        Ok(local)
    })?;
    let mut counts = BTreeMap::new();
    for p in parts {
        for (k, v) in p {
            *counts.entry(k).or_default() += v;
        }
    }
    Ok(CrossingCounts { samples: n_samples as u64, counts })
}

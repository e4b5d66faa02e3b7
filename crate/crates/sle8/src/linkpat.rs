//! Planar link patterns, meanders and non-crossing partitions.
//!
//! Indices are 1-based. A pattern on `2N` points is stored with its links
//! sorted so that `a_1 < a_2 < ... < a_N` and `a_r < b_r`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest number of links accepted by [`enumerate_patterns`].
pub const MAX_LINKS: usize = 10;

/// Largest `N` for which the meander matrix can be inverted.
pub const MAX_MEANDER_N: usize = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LinkError {
    #[error("index {0} repeated")]
    Repeated(usize),
    #[error("index {0} out of range 1..={1}")]
    OutOfRange(usize, usize),
    #[error("index {0} missing")]
    Missing(usize),
    #[error("link {0}-{1} is degenerate")]
    Degenerate(usize, usize),
    #[error("links {0}-{1} and {2}-{3} cross")]
    Crossing(usize, usize, usize, usize),
    #[error("patterns have different sizes ({0} and {1} links)")]
    SizeMismatch(usize, usize),
    #[error("number of links {0} outside 1..={1}")]
    UnsupportedSize(usize, usize),
    #[error("link {0}-{1} is {2} the pattern")]
    Precondition(usize, usize, &'static str),
    #[error("index {0} out of range for a pattern with {1} points")]
    BadIndex(usize, usize),
    #[error("parse error at position {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("partition blocks {0:?} and {1:?} interleave")]
    CrossingPartition(Vec<usize>, Vec<usize>),
    #[error("arc {0} appears in more than one block")]
    RepeatedArc(usize),
}

/// A planar pairing of `{1, ..., 2N}`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LinkPattern {
    links: Vec<(usize, usize)>,
}

impl LinkPattern {
    /// Builds a pattern from links given in any order or orientation.
    pub fn new(pairs: &[(usize, usize)]) -> Result<Self, LinkError> {
        let n2 = 2 * pairs.len();
        let mut seen = vec![false; n2 + 1];
        let mut links = Vec::with_capacity(pairs.len());
        for &(x, y) in pairs {
            for v in [x, y] {
                if v == 0 || v > n2 {
                    return Err(LinkError::OutOfRange(v, n2));
                }
            }
            if x == y {
                return Err(LinkError::Degenerate(x, y));
            }
            for v in [x, y] {
                if seen[v] {
                    return Err(LinkError::Repeated(v));
                }
                seen[v] = true;
            }
            links.push((x.min(y), x.max(y)));
        }
        if let Some(v) = (1..=n2).find(|&v| !seen[v]) {
            return Err(LinkError::Missing(v));
        }
        links.sort_unstable();
        for (r, &(a, b)) in links.iter().enumerate() {
            for &(c, d) in &links[r + 1..] {
                if a < c && c < b && b < d {
                    return Err(LinkError::Crossing(a, b, c, d));
                }
            }
        }
        Ok(Self { links })
    }

    fn from_partner(partner: &[usize]) -> Self {
        let mut links: Vec<(usize, usize)> = (1..partner.len())
            .filter(|&i| i < partner[i])
            .map(|i| (i, partner[i]))
            .collect();
        links.sort_unstable();
        Self { links }
    }

    /// The pattern `{{1,2},{3,4},...,{2N-1,2N}}`.
    pub fn all_simple(n: usize) -> Self {
        Self {
            links: (0..n).map(|r| (2 * r + 1, 2 * r + 2)).collect(),
        }
    }

    /// The fully nested pattern `{{1,2N},{2,2N-1},...}`.
    pub fn rainbow(n: usize) -> Self {
        Self {
            links: (0..n).map(|r| (r + 1, 2 * n - r)).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.links.len()
    }

    pub fn links(&self) -> &[(usize, usize)] {
        &self.links
    }

    /// `partner()[i]` is the index linked to `i`; entry 0 is unused.
    pub fn partner(&self) -> Vec<usize> {
        let mut p = vec![0; 2 * self.n() + 1];
        for &(a, b) in &self.links {
            p[a] = b;
            p[b] = a;
        }
        p
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        let key = (a.min(b), a.max(b));
        self.links.binary_search(&key).is_ok()
    }

    fn check_j(&self, j: usize) -> Result<(), LinkError> {
        if j == 0 || j >= 2 * self.n() {
            Err(LinkError::BadIndex(j, 2 * self.n()))
        } else {
            Ok(())
        }
    }

    /// Tying operation: `{j,l1},{j+1,l2}` become `{j,j+1},{l1,l2}`.
    pub fn tie(&self, j: usize) -> Result<Self, LinkError> {
        self.check_j(j)?;
        if self.contains(j, j + 1) {
            return Err(LinkError::Precondition(j, j + 1, "already in"));
        }
        let mut p = self.partner();
        let (l1, l2) = (p[j], p[j + 1]);
        p[j] = j + 1;
        p[j + 1] = j;
        p[l1] = l2;
        p[l2] = l1;
        Ok(Self::from_partner(&p))
    }

    /// Deletes the link `{j,j+1}` and relabels the remaining indices.
    pub fn remove(&self, j: usize) -> Result<Self, LinkError> {
        self.check_j(j)?;
        if !self.contains(j, j + 1) {
            return Err(LinkError::Precondition(j, j + 1, "not in"));
        }
        let relabel = |i: usize| if i > j + 1 { i - 2 } else { i };
        let links = self
            .links
            .iter()
            .filter(|&&(a, _)| a != j)
            .map(|&(a, b)| (relabel(a), relabel(b)))
            .collect::<Vec<_>>();
        let mut links = links;
        links.sort_unstable();
        Ok(Self { links })
    }

    /// Removal of a link joining consecutive indices.
    pub fn rho_hat(&self, j: usize) -> Result<Self, LinkError> {
        self.remove(j)
    }

    /// Tie at `j`, then remove the new link.
    pub fn wp_hat(&self, j: usize) -> Result<Self, LinkError> {
        self.tie(j)?.remove(j)
    }

    /// Relabels `i -> i-1`, with `1 -> 2N`.
    pub fn cyclic_shift(&self) -> Self {
        let n2 = 2 * self.n();
        let s = |i: usize| if i == 1 { n2 } else { i - 1 };
        let mut links: Vec<_> = self
            .links
            .iter()
            .map(|&(a, b)| {
                let (x, y) = (s(a), s(b));
                (x.min(y), x.max(y))
            })
            .collect();
        links.sort_unstable();
        Self { links }
    }

    /// An order in which the links can be peeled off, each joining two
    /// indices that are consecutive among those still present.
    pub fn allowable_ordering(&self) -> Vec<(usize, usize)> {
        let mut alive: Vec<usize> = (1..=2 * self.n()).collect();
        let p = self.partner();
        let mut order = Vec::with_capacity(self.n());
        while !alive.is_empty() {
            let k = (0..alive.len() - 1)
                .find(|&k| p[alive[k]] == alive[k + 1])
                .expect("planar pattern always has a consecutive link");
            order.push((alive[k], alive[k + 1]));
            alive.drain(k..k + 2);
        }
        order
    }

    /// Regions cut out by the links drawn outside a disc whose boundary
    /// carries the points `1..2N`. Each boundary arc `(k, k+1)` (indices
    /// mod `2N`, arc `2N` being `(2N, 1)`) lies in exactly one region;
    /// the result maps every arc `k` to a region label.
    pub fn boundary_regions(&self) -> Vec<usize> {
        let n2 = 2 * self.n();
        let p = self.partner();
        let mut label = vec![usize::MAX; n2 + 1];
        let mut next = 0;
        for start in 1..=n2 {
            if label[start] != usize::MAX {
                continue;
            }
            let mut k = start;
            while label[k] == usize::MAX {
                label[k] = next;
                let end = if k == n2 { 1 } else { k + 1 };
                k = p[end];
            }
            next += 1;
        }
        label
    }

    /// Parses `1-6,2-5,3-4`.
    pub fn parse(s: &str) -> Result<Self, LinkError> {
        let mut pairs = Vec::new();
        let mut pos = 0;
        for item in s.split(',') {
            let t = item.trim();
            let lead = item.len() - item.trim_start().len();
            let (a, b) = t.split_once('-').ok_or_else(|| LinkError::Parse {
                pos: pos + lead,
                msg: format!("expected `a-b`, found `{t}`"),
            })?;
            let num = |x: &str, off: usize| {
                x.trim().parse::<usize>().map_err(|_| LinkError::Parse {
                    pos: pos + lead + off,
                    msg: format!("`{}` is not an index", x.trim()),
                })
            };
            pairs.push((num(a, 0)?, num(b, a.len() + 1)?));
            pos += item.len() + 1;
        }
        Self::new(&pairs)
    }
}

impl fmt::Display for LinkPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.links.iter().map(|(a, b)| format!("{a}-{b}")).collect();
        write!(f, "{}", parts.join(","))
    }
}

impl fmt::Debug for LinkPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LinkPattern({self})")
    }
}

impl FromStr for LinkPattern {
    type Err = LinkError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

/// Catalan number `C_n`.
pub fn catalan(n: usize) -> usize {
    let mut c: u128 = 1;
    for k in 0..n as u128 {
        c = c * 2 * (2 * k + 1) / (k + 2);
    }
    c as usize
}

/// All planar link patterns with `n` links, lexicographically sorted.
pub fn enumerate_patterns(n: usize) -> Result<Vec<LinkPattern>, LinkError> {
    if !(1..=MAX_LINKS).contains(&n) {
        return Err(LinkError::UnsupportedSize(n, MAX_LINKS));
    }
    fn rec(lo: usize, hi: usize, acc: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
        if lo > hi {
            out.push(acc.clone());
            return;
        }
        let mut b = lo + 1;
        while b <= hi {
            let mut inner = Vec::new();
            rec(lo + 1, b - 1, &mut Vec::new(), &mut inner);
            for inn in inner {
                let len = acc.len();
                acc.push((lo, b));
                acc.extend(inn);
                rec(b + 1, hi, acc, out);
                acc.truncate(len);
            }
            b += 2;
        }
    }
    let mut raw = Vec::new();
    rec(1, 2 * n, &mut Vec::new(), &mut raw);
    let mut pats: Vec<LinkPattern> = raw
        .into_iter()
        .map(|mut l| {
            l.sort_unstable();
            LinkPattern { links: l }
        })
        .collect();
    pats.sort();
    Ok(pats)
}

/// Number of loops in the meander formed by `alpha` above the line and the
/// mirror image of `beta` below it.
pub fn meander_loops(alpha: &LinkPattern, beta: &LinkPattern) -> Result<usize, LinkError> {
    if alpha.n() != beta.n() {
        return Err(LinkError::SizeMismatch(alpha.n(), beta.n()));
    }
    let n2 = 2 * alpha.n();
    let mut dsu = Dsu::new(n2 + 1);
    for &(a, b) in alpha.links().iter().chain(beta.links()) {
        dsu.union(a, b);
    }
    Ok((1..=n2).filter(|&i| dsu.find(i) == i).count())
}

/// `M_{alpha,beta} = 1` iff the meander is a single loop.
pub fn meander_entry(alpha: &LinkPattern, beta: &LinkPattern) -> bool {
    meander_loops(alpha, beta).map(|l| l == 1).unwrap_or(false)
}

pub(crate) struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    pub(crate) fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        true
    }
}

/// Dense matrix of exact rationals.
#[derive(Clone, Debug, PartialEq)]
pub struct RationalMatrix {
    dim: usize,
    data: Vec<BigRational>,
}

impl RationalMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![BigRational::zero(); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = BigRational::one();
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> &BigRational {
        &self.data[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: BigRational) {
        self.data[i * self.dim + j] = v;
    }

    pub fn to_f64(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j).to_f64().unwrap_or(f64::NAN)).collect())
            .collect()
    }

    pub fn mul(&self, other: &Self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let b = other.get(k, j);
                    if !b.is_zero() {
                        out.data[i * n + j] += a * b;
                    }
                }
            }
        }
        out
    }

    /// Gauss-Jordan inverse over the rationals. `None` if singular.
    pub fn inverse(&self) -> Option<Self> {
        let n = self.dim;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        for col in 0..n {
            let piv = (col..n).find(|&r| !a.get(r, col).is_zero())?;
            if piv != col {
                for j in 0..n {
                    a.data.swap(piv * n + j, col * n + j);
                    inv.data.swap(piv * n + j, col * n + j);
                }
            }
            let p = a.get(col, col).clone();
            for j in 0..n {
                if !a.data[col * n + j].is_zero() {
                    a.data[col * n + j] /= &p;
                }
                if !inv.data[col * n + j].is_zero() {
                    inv.data[col * n + j] /= &p;
                }
            }
            let a_row: Vec<(usize, BigRational)> = (0..n)
                .filter(|&j| !a.get(col, j).is_zero())
                .map(|j| (j, a.get(col, j).clone()))
                .collect();
            let i_row: Vec<(usize, BigRational)> = (0..n)
                .filter(|&j| !inv.get(col, j).is_zero())
                .map(|j| (j, inv.get(col, j).clone()))
                .collect();
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a.get(r, col).clone();
                if f.is_zero() {
                    continue;
                }
                for (j, v) in &a_row {
                    a.data[r * n + j] -= &f * v;
                }
                for (j, v) in &i_row {
                    inv.data[r * n + j] -= &f * v;
                }
            }
        }
        Some(inv)
    }

    /// Largest numerator or denominator bit length, a size diagnostic.
    pub fn max_bits(&self) -> u64 {
        self.data
            .iter()
            .map(|q| q.numer().abs().bits().max(q.denom().bits()))
            .max()
            .unwrap_or(0)
    }
}

/// The meander matrix on `LP_N`, indexed in [`enumerate_patterns`] order.
pub fn meander_matrix(n: usize) -> Result<RationalMatrix, LinkError> {
    let pats = enumerate_patterns(n)?;
    let mut m = RationalMatrix::zeros(pats.len());
    for (i, a) in pats.iter().enumerate() {
        for (j, b) in pats.iter().enumerate() {
            if meander_entry(a, b) {
                m.set(i, j, BigRational::from_integer(BigInt::one()));
            }
        }
    }
    Ok(m)
}

/// Exact inverse of the meander matrix. Results are cached per `N`.
pub fn meander_inverse(n: usize) -> Result<&'static RationalMatrix, LinkError> {
    static CACHE: [OnceLock<RationalMatrix>; MAX_MEANDER_N + 1] = [const { OnceLock::new() }; MAX_MEANDER_N + 1];
    if !(1..=MAX_MEANDER_N).contains(&n) {
        return Err(LinkError::UnsupportedSize(n, MAX_MEANDER_N));
    }
    Ok(CACHE[n].get_or_init(|| {
        meander_matrix(n)
            .expect("size checked")
            .inverse()
            .expect("meander matrix is invertible")
    }))
}

/// Floating-point copy of [`meander_inverse`].
pub fn meander_inverse_f64(n: usize) -> Result<&'static Vec<Vec<f64>>, LinkError> {
    static CACHE: [OnceLock<Vec<Vec<f64>>>; MAX_MEANDER_N + 1] = [const { OnceLock::new() }; MAX_MEANDER_N + 1];
    let inv = meander_inverse(n)?;
    Ok(CACHE[n].get_or_init(|| inv.to_f64()))
}

/// Cached pattern list.
pub fn patterns(n: usize) -> Result<&'static [LinkPattern], LinkError> {
    static CACHE: [OnceLock<Vec<LinkPattern>>; MAX_LINKS + 1] = [const { OnceLock::new() }; MAX_LINKS + 1];
    if !(1..=MAX_LINKS).contains(&n) {
        return Err(LinkError::UnsupportedSize(n, MAX_LINKS));
    }
    Ok(CACHE[n].get_or_init(|| enumerate_patterns(n).expect("size checked")))
}

/// Position of `p` in [`enumerate_patterns`] order.
pub fn pattern_index(p: &LinkPattern) -> usize {
    patterns(p.n())
        .expect("pattern size within range")
        .binary_search(p)
        .expect("patterns are canonical")
}

/// Non-crossing partition of the arcs `1..N`.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NonCrossingPartition {
    n_arcs: usize,
    blocks: Vec<Vec<usize>>,
}

impl NonCrossingPartition {
    pub fn new(n_arcs: usize, blocks: Vec<Vec<usize>>) -> Result<Self, LinkError> {
        let mut seen = vec![false; n_arcs + 1];
        let mut blocks: Vec<Vec<usize>> = blocks
            .into_iter()
            .filter(|b| !b.is_empty())
            .map(|mut b| {
                b.sort_unstable();
                b
            })
            .collect();
        for b in &blocks {
            for &i in b {
                if i == 0 || i > n_arcs {
                    return Err(LinkError::OutOfRange(i, n_arcs));
                }
                if seen[i] {
                    return Err(LinkError::RepeatedArc(i));
                }
                seen[i] = true;
            }
        }
        if let Some(i) = (1..=n_arcs).find(|&i| !seen[i]) {
            return Err(LinkError::Missing(i));
        }
        blocks.sort();
        for (x, b1) in blocks.iter().enumerate() {
            for b2 in &blocks[x + 1..] {
                let interleave = b1.iter().any(|&a| {
                    b1.iter().any(|&c| {
                        a < c && b2.iter().any(|&b| a < b && b < c) && b2.iter().any(|&d| d < a || d > c)
                    })
                });
                if interleave {
                    return Err(LinkError::CrossingPartition(b1.clone(), b2.clone()));
                }
            }
        }
        Ok(Self { n_arcs, blocks })
    }

    pub fn n_arcs(&self) -> usize {
        self.n_arcs
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// `block_of()[i]` is the block index of arc `i`; entry 0 unused.
    pub fn block_of(&self) -> Vec<usize> {
        let mut out = vec![usize::MAX; self.n_arcs + 1];
        for (k, b) in self.blocks.iter().enumerate() {
            for &i in b {
                out[i] = k;
            }
        }
        out
    }

    /// Parses `1 3|2`.
    pub fn parse(n_arcs: usize, s: &str) -> Result<Self, LinkError> {
        let mut blocks = Vec::new();
        let mut pos = 0;
        for part in s.split('|') {
            let mut b = Vec::new();
            for tok in part.split_whitespace() {
                let v = tok.parse::<usize>().map_err(|_| LinkError::Parse {
                    pos,
                    msg: format!("`{tok}` is not an arc index"),
                })?;
                b.push(v);
            }
            blocks.push(b);
            pos += part.len() + 1;
        }
        Self::new(n_arcs, blocks)
    }
}

impl fmt::Display for NonCrossingPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .blocks
            .iter()
            .map(|b| b.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" "))
            .collect();
        write!(f, "{}", parts.join("|"))
    }
}

impl fmt::Debug for NonCrossingPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NonCrossingPartition({self})")
    }
}

/// Arc `i` spans the points `2i-1, 2i`. A block `i_1 < ... < i_m` yields the
/// outer link `{2 i_1 - 1, 2 i_m}` and the inner links `{2 i_k, 2 i_{k+1} - 1}`;
/// an isolated arc `i` yields `{2i-1, 2i}`.
pub fn partition_to_pattern(pi: &NonCrossingPartition) -> LinkPattern {
    let mut pairs = Vec::with_capacity(pi.n_arcs());
    for b in pi.blocks() {
        pairs.push((2 * b[0] - 1, 2 * b[b.len() - 1]));
        for w in b.windows(2) {
            pairs.push((2 * w[0], 2 * w[1] - 1));
        }
    }
    LinkPattern::new(&pairs).expect("non-crossing partition gives a planar pattern")
}

/// Inverse of [`partition_to_pattern`]: arcs `i < i'` share a block when
/// `{2i, 2i'-1}` is a link.
pub fn pattern_to_partition(beta: &LinkPattern) -> NonCrossingPartition {
    let n = beta.n();
    let mut dsu = Dsu::new(n + 1);
    for &(a, b) in beta.links() {
        if a % 2 == 0 {
            dsu.union(a / 2, (b + 1) / 2);
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 1..=n {
        groups.entry(dsu.find(i)).or_default().push(i);
    }
    NonCrossingPartition::new(n, groups.into_values().collect()).expect("planar pattern gives a partition")
}

/// `c_beta(k)` for a strictly increasing `k` in `{1, ..., 2N-1}`.
///
/// Evaluates `i^{sum(k_r - a_r)} * sum_sigma sgn(sigma) prod_r 1{k_sigma(r) in [a_r, b_r - 1]}`
/// by brute force over permutations with pruning.
pub fn coefficient(beta: &LinkPattern, k: &[usize]) -> u8 {
    let n = beta.n();
    assert_eq!(k.len(), n, "k must have one entry per link");
    assert!(k.windows(2).all(|w| w[0] < w[1]), "k must be strictly increasing");
    let links = beta.links();
    let ok: Vec<Vec<bool>> = links
        .iter()
        .map(|&(a, b)| k.iter().map(|&ks| a <= ks && ks < b).collect())
        .collect();
    fn rec(r: usize, used: &mut [bool], ok: &[Vec<bool>], perm: &mut Vec<usize>, acc: &mut i64) {
        let n = ok.len();
        if r == n {
            let mut inv = 0;
            for x in 0..n {
                for y in x + 1..n {
                    if perm[x] > perm[y] {
                        inv += 1;
                    }
                }
            }
            *acc += if inv % 2 == 0 { 1 } else { -1 };
            return;
        }
        for s in 0..n {
            if !used[s] && ok[r][s] {
                used[s] = true;
                perm.push(s);
                rec(r + 1, used, ok, perm, acc);
                perm.pop();
                used[s] = false;
            }
        }
    }
    let mut det = 0i64;
    rec(0, &mut vec![false; n], &ok, &mut Vec::with_capacity(n), &mut det);
    let shift: i64 = k.iter().zip(links).map(|(&kr, &(a, _))| kr as i64 - a as i64).sum();
    // i^shift * det with det an integer
    let (re, im) = match shift.rem_euclid(4) {
        0 => (det, 0),
        1 => (0, det),
        2 => (-det, 0),
        _ => (0, -det),
    };
    assert!(im == 0 && (re == 0 || re == 1), "coefficient {re}+{im}i for {beta} at {k:?}");
    re as u8
}

/// All strictly increasing `k` with `c_beta(k) = 1`.
pub fn coefficient_support(beta: &LinkPattern) -> Vec<Vec<usize>> {
    let n = beta.n();
    let mut out = Vec::new();
    let mut k = Vec::with_capacity(n);
    fn rec(start: usize, top: usize, n: usize, k: &mut Vec<usize>, beta: &LinkPattern, out: &mut Vec<Vec<usize>>) {
        if k.len() == n {
            if coefficient(beta, k) == 1 {
                out.push(k.clone());
            }
            return;
        }
        for v in start..=top {
            k.push(v);
            rec(v + 1, top, n, k, beta, out);
            k.pop();
        }
    }
    rec(1, 2 * n - 1, n, &mut k, beta, &mut out);
    out
}

/// Compatible patterns: all `alpha` with `M_{alpha,beta} = 1`.
pub fn compatible(beta: &LinkPattern) -> Vec<LinkPattern> {
    patterns(beta.n())
        .expect("pattern size within range")
        .iter()
        .filter(|a| meander_entry(a, beta))
        .cloned()
        .collect()
}

/// Set of indices used by a pattern, as a sanity helper for tests.
pub fn index_set(p: &LinkPattern) -> BTreeSet<usize> {
    p.links().iter().flat_map(|&(a, b)| [a, b]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(s: &str) -> LinkPattern {
        s.parse().unwrap()
    }

    #[test]
    fn enumerate_small() {
        assert_eq!(enumerate_patterns(1).unwrap(), vec![lp("1-2")]);
        assert_eq!(enumerate_patterns(3).unwrap().len(), 5);
        let four = enumerate_patterns(4).unwrap();
        assert_eq!(four.len(), 14);
        assert!(four.contains(&lp("1-2,3-8,4-7,5-6")));
        for n in 1..=7 {
            assert_eq!(enumerate_patterns(n).unwrap().len(), catalan(n));
        }
        assert!(enumerate_patterns(0).is_err());
        assert!(enumerate_patterns(11).is_err());
    }

    #[test]
    fn parse_errors() {
        assert_eq!(LinkPattern::parse("1-2,2-3").unwrap_err().to_string(), "index 2 repeated");
        assert!(matches!(LinkPattern::parse("1-3,2-4"), Err(LinkError::Crossing(..))));
        assert!(matches!(LinkPattern::parse("1-x"), Err(LinkError::Parse { .. })));
        assert!(matches!(LinkPattern::parse("1-5,2-3"), Err(LinkError::OutOfRange(5, 4))));
        assert_eq!(lp("6-1,5-2,3-4").to_string(), "1-6,2-5,3-4");
    }

    #[test]
    fn loops() {
        let a = lp("1-2,3-4");
        let b = lp("1-4,2-3");
        assert_eq!(meander_loops(&a, &a).unwrap(), 2);
        assert_eq!(meander_loops(&b, &a).unwrap(), 1);
        assert_eq!(meander_loops(&lp("1-2"), &lp("1-2")).unwrap(), 1);
        assert!(meander_loops(&a, &lp("1-2")).is_err());
    }

    #[test]
    fn meander_small() {
        let m1 = meander_matrix(1).unwrap();
        assert_eq!(m1, RationalMatrix::identity(1));
        let m2 = meander_matrix(2).unwrap().to_f64();
        assert_eq!(m2, vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        let beta = lp("1-2,3-8,4-7,5-6");
        assert_eq!(compatible(&beta).len(), 4);
    }

    #[test]
    fn meander_inverse_exact() {
        for n in 1..=5 {
            let m = meander_matrix(n).unwrap();
            let inv = meander_inverse(n).unwrap();
            assert_eq!(m.mul(inv), RationalMatrix::identity(m.dim()));
        }
    }

    #[test]
    fn tie_examples() {
        assert_eq!(lp("1-4,2-3").tie(1).unwrap(), lp("1-2,3-4"));
        assert_eq!(lp("1-2,3-8,4-7,5-6").tie(2).unwrap(), lp("1-8,2-3,4-7,5-6"));
        assert_eq!(lp("1-6,2-5,3-4").tie(2).unwrap(), lp("1-6,2-3,4-5"));
        assert!(lp("1-2,3-4").tie(1).is_err());
    }

    #[test]
    fn removal_examples() {
        assert_eq!(lp("1-2,3-4").remove(1).unwrap(), lp("1-2"));
        assert_eq!(lp("1-8,2-5,3-4,6-7").rho_hat(3).unwrap(), lp("1-6,2-3,4-5"));
        assert_eq!(lp("1-2,3-8,4-7,5-6").wp_hat(3).unwrap(), lp("1-2,3-4,5-6"));
        assert!(lp("1-2,3-4").remove(2).is_err());
        assert!(lp("1-2,3-4").wp_hat(1).is_err());
    }

    #[test]
    fn cyclic_shift_examples() {
        assert_eq!(lp("1-2,3-4").cyclic_shift(), lp("1-4,2-3"));
        assert_eq!(lp("1-4,2-3").cyclic_shift(), lp("1-2,3-4"));
        for b in enumerate_patterns(3).unwrap() {
            let mut s = b.clone();
            for _ in 0..6 {
                s = s.cyclic_shift();
            }
            assert_eq!(s, b);
        }
    }

    #[test]
    fn partitions() {
        let pi = NonCrossingPartition::parse(4, "1|2 4|3").unwrap();
        assert_eq!(partition_to_pattern(&pi), lp("1-2,3-8,4-7,5-6"));
        let single = NonCrossingPartition::parse(3, "1|2|3").unwrap();
        assert_eq!(partition_to_pattern(&single), lp("1-2,3-4,5-6"));
        assert_eq!(pattern_to_partition(&lp("1-2,3-4,5-6")), single);
        assert!(NonCrossingPartition::parse(4, "1 3|2 4").is_err());
        assert_eq!(pi.to_string(), "1|2 4|3");
    }

    #[test]
    fn coefficient_examples() {
        let simple = LinkPattern::all_simple(3);
        let supp = coefficient_support(&simple);
        assert_eq!(supp, vec![vec![1, 3, 5]]);
        assert_eq!(coefficient_support(&lp("1-4,2-3")), vec![vec![1, 2], vec![2, 3]]);
        for b in enumerate_patterns(4).unwrap() {
            let a: Vec<usize> = b.links().iter().map(|l| l.0).collect();
            assert_eq!(coefficient(&b, &a), 1);
        }
    }

    #[test]
    fn allowable() {
        assert_eq!(lp("1-4,2-3").allowable_ordering(), vec![(2, 3), (1, 4)]);
        assert_eq!(lp("1-6,2-5,3-4").allowable_ordering(), vec![(3, 4), (2, 5), (1, 6)]);
        assert_eq!(lp("1-2,3-4").allowable_ordering(), vec![(1, 2), (3, 4)]);
    }

    #[test]
    fn regions_of_fig3_pattern() {
        let r = lp("1-2,3-8,4-7,5-6").boundary_regions();
        // primal arcs 3 and 7 (points 3-4, 7-8) together, dual arcs 2 and 8 together, 4 and 6 together
        assert_eq!(r[3], r[7]);
        assert_eq!(r[2], r[8]);
        assert_eq!(r[4], r[6]);
        assert_ne!(r[1], r[3]);
        assert_ne!(r[5], r[3]);
    }
}

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sle8::coulomb::{self, Target};
use sle8::linkpat::{self, coefficient, meander_entry, meander_loops, partition_to_pattern, pattern_to_partition, LinkPattern};
use sle8::loewner::{self, SimParams};
use sle8::quad::{self, Config};
use sle8::scmap::{self, SlitMap};
use sle8::ust::{right_free_arcs, LatticePolygon, WiredGraph};

fn pattern(max_n: usize) -> impl Strategy<Value = LinkPattern> {
    (1..=max_n).prop_flat_map(|n| {
        let pats = linkpat::patterns(n).unwrap();
        (0..pats.len()).prop_map(move |i| pats[i].clone())
    })
}

fn pattern_pair(max_n: usize) -> impl Strategy<Value = (LinkPattern, LinkPattern)> {
    (1..=max_n).prop_flat_map(|n| {
        let pats = linkpat::patterns(n).unwrap();
        (0..pats.len(), 0..pats.len()).prop_map(move |(i, j)| (pats[i].clone(), pats[j].clone()))
    })
}

fn config(n: usize) -> impl Strategy<Value = Config> {
    (-3.0..3.0f64, prop::collection::vec(0.3..2.0f64, 2 * n - 1)).prop_map(|(start, gaps)| {
        let mut p = vec![start];
        for g in gaps {
            p.push(p.last().unwrap() + g);
        }
        Config::new(p).unwrap()
    })
}

fn increasing_subsets(len: usize, size: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, len: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for v in start..=len {
            cur.push(v);
            rec(v + 1, len, size, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(1, len, size, &mut Vec::new(), &mut out);
    out
}

proptest! {
    #[test]
    fn meander_loops_symmetric_and_bounded((a, b) in pattern_pair(6)) {
        let l = meander_loops(&a, &b).unwrap();
        prop_assert!((1..=a.n()).contains(&l));
        prop_assert_eq!(l, meander_loops(&b, &a).unwrap());
    }

    #[test]
    fn partition_round_trip(p in pattern(8)) {
        prop_assert_eq!(partition_to_pattern(&pattern_to_partition(&p)), p);
    }

    #[test]
    fn pattern_display_round_trip(p in pattern(8)) {
        prop_assert_eq!(p.to_string().parse::<LinkPattern>().unwrap(), p);
    }
}

#[test]
fn coefficients_are_zero_or_one() {
    for n in 1..=6 {
        let ks = increasing_subsets(2 * n - 1, n);
        for b in linkpat::patterns(n).unwrap() {
            for k in &ks {
                assert!(coefficient(b, k) <= 1, "{b} {k:?}");
            }
        }
    }
}

#[test]
fn removal_preserves_compatibility() {
    for n in 2..=5 {
        let pats = linkpat::patterns(n).unwrap();
        for a in pats {
            for b in pats {
                if !meander_entry(a, b) {
                    continue;
                }
                for j in 1..2 * n {
                    if a.contains(j, j + 1) {
                        assert!(!b.contains(j, j + 1));
                        assert!(meander_entry(&a.rho_hat(j).unwrap(), &b.wp_hat(j).unwrap()), "{a} {b} {j}");
                    }
                }
            }
        }
    }
}

#[test]
fn right_side_matches_endpoint_count() {
    // walking just inside the boundary from the closing arc to free arc k,
    // every endpoint of a traversed chord changes the winding by one
    for n in 1..=4 {
        let pats = linkpat::patterns(n).unwrap();
        for b in pats {
            for a in pats.iter().filter(|a| meander_entry(a, b)) {
                let (pa, pb) = (a.partner(), b.partner());
                let mut chords = Vec::new();
                let mut at = 1;
                loop {
                    chords.push((at, pa[at]));
                    if pa[at] == 2 * n {
                        break;
                    }
                    at = pb[pa[at]];
                }
                let side = right_free_arcs(a, b);
                for k in 1..=n {
                    let s: i64 = chords.iter().map(|&(u, v)| i64::from(u <= 2 * k) - i64::from(v <= 2 * k)).sum();
                    let expect = k < n && s != 0;
                    assert_eq!(side[k], expect, "alpha={a} beta={b} k={k}");
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn simplex_integrals_nonnegative_and_symmetric(x in config(2), k1 in 1usize..4, k2 in 1usize..4) {
        let a = quad::simplex_integral(&x, &[k1, k2]).unwrap().value;
        let b = quad::simplex_integral(&x, &[k2, k1]).unwrap().value;
        prop_assert!(a >= 0.0);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn partition_functions_positive_and_normalised(x in (1usize..=3).prop_flat_map(config)) {
        let n = x.n_links();
        let fs = coulomb::f_det_all(&x).unwrap();
        let zs = coulomb::z_all(&x).unwrap();
        for (f, z) in fs.iter().zip(&zs) {
            prop_assert!(f.value > 0.0 && z.value > 0.0);
            prop_assert!(f.im_residue <= 1e-8 * f.value);
        }
        for b in linkpat::patterns(n).unwrap() {
            let total: f64 = coulomb::crossing_probs(b, &x).unwrap().iter().map(|(_, p)| p).sum();
            prop_assert!((total - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn loop_periods_from_interval_periods(x in (2usize..=4).prop_flat_map(config), pick in 0usize..14) {
        let pats = linkpat::patterns(x.n_links()).unwrap();
        let b = &pats[pick % pats.len()];
        let m = scmap::loop_matrix_m(b);
        let p = scmap::period_matrix_p(b, &x).unwrap();
        let po = scmap::loop_period_matrix(b, &x).unwrap();
        let diff = (&m * &p - &po).iter().map(|c| c.norm()).fold(0.0, f64::max);
        let scale = po.iter().map(|c| c.norm()).fold(0.0, f64::max);
        prop_assert!(diff <= 1e-8 * scale, "{b}: {diff:e}");
    }

    #[test]
    fn driving_value_stays_between_spectators(seed in any::<u64>()) {
        let x = Config::new(vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let t = Target::F(LinkPattern::rainbow(3));
        let path = loewner::simulate(&x, 3, &t, SimParams::new(1e-3, 0.02), seed).unwrap();
        for s in &path.states {
            prop_assert!(s.v[1] < s.w && s.w < s.v[2]);
            prop_assert!(s.v.windows(2).all(|w| w[0] < w[1]));
        }
        let again = loewner::simulate(&x, 3, &t, SimParams::new(1e-3, 0.02), seed).unwrap();
        prop_assert_eq!(path.states, again.states);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn slit_map_roots_bracketed_and_closed(x in (3usize..=5).prop_flat_map(config), pick in 0usize..42) {
        let pats: Vec<&LinkPattern> = linkpat::patterns(x.n_links()).unwrap().iter().filter(|b| !b.contains(1, 2 * b.n())).collect();
        let b = pats[pick % pats.len()];
        let params = scmap::solve_q(b, &x).unwrap();
        let map = SlitMap::new(params).unwrap();
        for r in map.closure_residuals().unwrap() {
            prop_assert!(r < 1e-8);
        }
    }
}

/// All spanning trees of the contracted graph, as sorted edge lists.
fn all_trees(g: &WiredGraph) -> Vec<Vec<usize>> {
    let edges: Vec<(usize, usize, usize)> = g
        .poly
        .edges
        .iter()
        .enumerate()
        .map(|(e, &(a, b))| (g.node_of[a] as usize, g.node_of[b] as usize, e))
        .filter(|&(a, b, _)| a != b)
        .collect();
    let need = g.n_nodes - 1;
    let mut out = Vec::new();
    for subset in increasing_subsets(edges.len(), need) {
        let mut parent: Vec<usize> = (0..g.n_nodes).collect();
        fn root(parent: &[usize], mut v: usize) -> usize {
            while parent[v] != v {
                v = parent[v];
            }
            v
        }
        let mut ok = true;
        for &i in &subset {
            let (a, b, _) = edges[i - 1];
            let (ra, rb) = (root(&parent, a), root(&parent, b));
            if ra == rb {
                ok = false;
                break;
            }
            parent[ra] = rb;
        }
        if ok {
            let mut t: Vec<usize> = subset.iter().map(|&i| edges[i - 1].2).collect();
            t.sort_unstable();
            out.push(t);
        }
    }
    out
}

#[test]
fn wilson_sampler_is_uniform() {
    let poly = LatticePolygon::from_grid(2, 2, vec![0, 2, 4, 6], 0.5).unwrap();
    let g = WiredGraph::new(poly, "1-2,3-4".parse().unwrap()).unwrap();
    let trees = all_trees(&g);
    let index: std::collections::HashMap<Vec<usize>, usize> = trees.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
    let mut counts = vec![0u64; trees.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 100_000u64;
    for _ in 0..n {
        let t = g.sample_tree(&mut rng);
        let key: Vec<usize> = t.edges.iter().enumerate().filter(|(_, &b)| b).map(|(e, _)| e).collect();
        counts[index[&key]] += 1;
    }
    let p = 1.0 / trees.len() as f64;
    let sigma = (n as f64 * p * (1.0 - p)).sqrt();
    for (i, &c) in counts.iter().enumerate() {
        assert!((c as f64 - n as f64 * p).abs() <= 4.0 * sigma, "tree {i}: {c} of {n}, {} trees", trees.len());
    }
}

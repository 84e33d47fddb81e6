//! Shared fixtures and independent oracles for the integration suites.
#![allow(dead_code)]

use hydrostate::network::{build_network, Network, NetworkSpec, NodeRole, PipeParams};
use hydrostate::testkit::{random_connected_wds, GeneratorConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const HEAD_RANGE: (f64, f64) = (50.0, 150.0);

/// Random network with between `min_nodes` and `max_nodes` nodes.
pub fn random_network(seed: u64, min_nodes: usize, max_nodes: usize) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let nodes = rng.random_range(min_nodes..=max_nodes);
    let reservoirs = rng.random_range(1..=3.min(nodes - 1));
    let consumers = nodes - reservoirs;
    let extra_edges = rng.random_range(0..=nodes / 2 + 1);
    random_connected_wds(&GeneratorConfig::new(seed, reservoirs, consumers, extra_edges)).unwrap()
}

pub fn network_family(count: usize, min_nodes: usize, max_nodes: usize, base_seed: u64) -> Vec<Network> {
    (0..count as u64).map(|i| random_network(base_seed + i, min_nodes, max_nodes)).collect()
}

/// Pipes with resistance `r` (diameter and roughness 1).
pub fn with_resistance(r: f64) -> PipeParams {
    PipeParams::new(r / 10.67, 1.0, 1.0)
}

pub fn single_pipe(r: f64) -> Network {
    let mut s = NetworkSpec::default();
    s.node("R", NodeRole::Reservoir).node("c1", NodeRole::Consumer).pipe("P1", "R", "c1", with_resistance(r));
    build_network(&s).unwrap()
}

pub fn series_line() -> Network {
    let mut s = NetworkSpec::default();
    s.node("R", NodeRole::Reservoir)
        .node("c1", NodeRole::Consumer)
        .node("c2", NodeRole::Consumer)
        .pipe("e1", "R", "c1", with_resistance(1.0))
        .pipe("e2", "c1", "c2", with_resistance(1.0));
    build_network(&s).unwrap()
}

pub fn triangle() -> Network {
    let mut s = NetworkSpec::default();
    s.node("R", NodeRole::Reservoir)
        .node("c1", NodeRole::Consumer)
        .node("c2", NodeRole::Consumer)
        .pipe("e1", "R", "c1", with_resistance(1.0))
        .pipe("e2", "R", "c2", with_resistance(1.0))
        .pipe("e3", "c1", "c2", with_resistance(1.0));
    build_network(&s).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Plain union-find for acyclicity and component checks.
pub struct Components {
    parent: Vec<usize>,
}

impl Components {
    pub fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    pub fn find(&mut self, mut v: usize) -> usize {
        while self.parent[v] != v {
            self.parent[v] = self.parent[self.parent[v]];
            v = self.parent[v];
        }
        v
    }

    /// Returns false if `a` and `b` were already joined.
    pub fn join(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}

/// Rank over the rationals by textbook Gaussian elimination in `f64` with
/// exact small-integer pivots; only used on `{-1,0,1}` matrices whose
/// eliminated entries stay small integers.
pub fn rank_by_float_elimination(matrix: &[Vec<i64>]) -> usize {
    let mut a: Vec<Vec<f64>> = matrix.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..rows).find(|&r| a[r][c].abs() > 0.5) else { continue };
        a.swap(p, rank);
        for r in 0..rows {
            if r != rank && a[r][c].abs() > 0.5 {
                let f = a[r][c] / a[rank][c];
                for k in 0..cols {
                    a[r][k] -= f * a[rank][k];
                }
            }
        }
        rank += 1;
    }
    rank
}

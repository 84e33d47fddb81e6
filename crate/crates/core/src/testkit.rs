//! Seeded generators for random networks and physically correct states.
//!
//! Randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! `seed_from_u64`, so every output is a pure function of its inputs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::completion::complete_from_heads;
use crate::hydraulics::HydraulicState;
use crate::network::{
    build_network, Network, NetworkSpec, NodeRole, PipeParams, DIAMETER_EXPONENT, HAZEN_WILLIAMS_COEFFICIENT,
    HAZEN_WILLIAMS_EXPONENT,
};

/// Maximum average number of extra pipes per unordered node pair.
pub const MAX_PARALLEL_PER_PAIR: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub reservoirs: usize,
    pub consumers: usize,
    /// Pipes added on top of a spanning tree; each adds one cycle-space dimension
    /// unless it joins two reservoirs.
    pub extra_edges: usize,
    pub head_range: (f64, f64),
    pub resistance_range: (f64, f64),
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            reservoirs: 1,
            consumers: 4,
            extra_edges: 2,
            head_range: (50.0, 150.0),
            resistance_range: (10.0, 1000.0),
        }
    }
}

impl GeneratorConfig {
    pub fn new(seed: u64, reservoirs: usize, consumers: usize, extra_edges: usize) -> Self {
        Self { seed, reservoirs, consumers, extra_edges, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeneratorError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("{requested} extra pipes exceed the cap of {cap} for {nodes} nodes")]
    InfeasibleConfig { requested: usize, cap: usize, nodes: usize },
}

fn validate(cfg: &GeneratorConfig) -> Result<(), GeneratorError> {
    let invalid = |msg: &str| Err(GeneratorError::InvalidConfig(msg.into()));
    if cfg.reservoirs == 0 || cfg.consumers == 0 {
        return invalid("need at least one reservoir and one consumer");
    }
    let (h0, h1) = cfg.head_range;
    if !(h0.is_finite() && h1.is_finite() && h0 <= h1) {
        return invalid("head range must be a finite nonempty interval");
    }
    let (r0, r1) = cfg.resistance_range;
    if !(r0 > 0.0 && r1.is_finite() && r0 <= r1) {
        return invalid("resistance range must be a positive interval");
    }
    let nodes = cfg.reservoirs + cfg.consumers;
    let cap = MAX_PARALLEL_PER_PAIR * nodes * (nodes - 1) / 2;
    if cfg.extra_edges > cap {
        return Err(GeneratorError::InfeasibleConfig { requested: cfg.extra_edges, cap, nodes });
    }
    Ok(())
}

/// Pipe parameters with a log-uniform resistance in `range`: diameter and
/// roughness are drawn from common ranges and the length solved for.
fn sample_params(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> PipeParams {
    let r = if lo == hi { lo } else { (rng.random_range(lo.ln()..hi.ln())).exp() };
    let diameter: f64 = rng.random_range(0.1..1.0);
    let roughness: f64 = rng.random_range(80.0..150.0);
    let per_metre =
        HAZEN_WILLIAMS_COEFFICIENT * diameter.powf(DIAMETER_EXPONENT) * roughness.powf(-HAZEN_WILLIAMS_EXPONENT);
    PipeParams::new(r / per_metre, diameter, roughness)
}

/// Random connected network: a random spanning tree over all nodes plus
/// `extra_edges` uniformly drawn non-loop pipes (parallels allowed).
pub fn random_connected_wds(cfg: &GeneratorConfig) -> Result<Network, GeneratorError> {
    validate(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut ids: Vec<(String, NodeRole)> = (1..=cfg.reservoirs)
        .map(|i| (format!("R{i}"), NodeRole::Reservoir))
        .chain((1..=cfg.consumers).map(|i| (format!("J{i}"), NodeRole::Consumer)))
        .collect();
    ids.shuffle(&mut rng);

    let mut spec = NetworkSpec::default();
    for (id, role) in &ids {
        spec.node(id.clone(), *role);
    }
    let n = ids.len();
    let mut next_pipe = 1;
    let mut add_pipe = |spec: &mut NetworkSpec, rng: &mut ChaCha8Rng, a: usize, b: usize| {
        let (from, to) = if rng.random_bool(0.5) { (a, b) } else { (b, a) };
        let params = sample_params(rng, cfg.resistance_range);
        spec.pipe(format!("P{next_pipe}"), ids[from].0.clone(), ids[to].0.clone(), params);
        next_pipe += 1;
    };
    for v in 1..n {
        let u = rng.random_range(0..v);
        add_pipe(&mut spec, &mut rng, u, v);
    }
    for _ in 0..cfg.extra_edges {
        let a = rng.random_range(0..n);
        let b = (a + rng.random_range(1..n)) % n;
        add_pipe(&mut spec, &mut rng, a, b);
    }
    Ok(build_network(&spec).expect("generated network is valid by construction"))
}

/// Heads drawn uniformly from `head_range`, completed in closed form.
pub fn random_ground_truth_state(net: &Network, seed: u64, head_range: (f64, f64)) -> HydraulicState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = head_range;
    let heads: Vec<f64> =
        (0..net.node_count()).map(|_| if lo == hi { lo } else { rng.random_range(lo..=hi) }).collect();
    complete_from_heads(net, &heads).expect("one head per node").state
}

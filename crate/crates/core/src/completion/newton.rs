//! Damped Newton iteration for the demand-driven problem.
//!
//! Unknowns are stacked as `x = (h_Vc, q)` and the residual is
//!
//! ```text
//! F1 = B_Vc^T h_Vc + B_Vr^T h_Vr - D(q) q    (one row per pipe)
//! F2 = B_Vc q + d                            (one row per consumer)
//! ```
//!
//! with Jacobian `[[B_Vc^T, -G(q)], [0, B_Vc]]`, `G = diag(x r |q|^(x-1))`.
//! `G` vanishes at zero flow, so `|q|` is clamped to `zero_flow_epsilon`
//! inside the Jacobian only.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::hydraulics::{head_loss, head_loss_slope, SOLVER_TOLERANCE};
use crate::network::Network;

/// Starting point of the Newton iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitialStrategy {
    /// Forest flows meeting the demands with zero chord flows, heads from
    /// the forest energy relation.
    #[default]
    ForestFeasible,
    /// Uniformly random flows and consumer heads, reproducible from `seed`.
    Random { seed: u64 },
    Supplied { consumer_heads: Vec<f64>, flows: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Acceptance threshold on `|F|_inf`.
    pub tolerance: f64,
    pub zero_flow_epsilon: f64,
    pub damping: bool,
    /// Step halvings tried before giving up on a direction.
    pub max_halvings: usize,
    pub initial_strategy: InitialStrategy,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            tolerance: SOLVER_TOLERANCE,
            zero_flow_epsilon: 1e-8,
            damping: true,
            max_halvings: 30,
            initial_strategy: InitialStrategy::ForestFeasible,
        }
    }
}

pub(crate) struct NewtonOutcome {
    pub consumer_heads: Vec<f64>,
    pub flows: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

pub(crate) struct DemandProblem<'a> {
    net: &'a Network,
    /// `B_Vr^T h_Vr` per pipe.
    reservoir_drive: Vec<f64>,
    demands: &'a [f64],
}

impl<'a> DemandProblem<'a> {
    pub(crate) fn new(net: &'a Network, reservoir_heads: &[f64], demands: &'a [f64]) -> Self {
        let heads = net.assemble_heads(reservoir_heads, &vec![0.0; net.consumer_count()]);
        let reservoir_drive = net
            .pipes()
            .iter()
            .map(|p| {
                let side = |v: usize| if net.is_consumer(v) { 0.0 } else { heads[v] };
                side(p.tail) - side(p.head)
            })
            .collect();
        Self { net, reservoir_drive, demands }
    }

    fn split<'x>(&self, x: &'x DVector<f64>) -> (&'x [f64], &'x [f64]) {
        x.as_slice().split_at(self.net.consumer_count())
    }

    fn residual(&self, x: &DVector<f64>) -> DVector<f64> {
        let net = self.net;
        let (h, q) = self.split(x);
        let nc = net.consumer_count();
        let mut f = DVector::zeros(net.pipe_count() + nc);
        for (e, p) in net.pipes().iter().enumerate() {
            let consumer_drop = net.consumer_position(p.tail).map_or(0.0, |i| h[i])
                - net.consumer_position(p.head).map_or(0.0, |i| h[i]);
            f[e] = consumer_drop + self.reservoir_drive[e] - head_loss(q[e], p.resistance);
        }
        let offset = net.pipe_count();
        for (i, &d) in self.demands.iter().enumerate() {
            f[offset + i] = d;
        }
        for (e, p) in net.pipes().iter().enumerate() {
            if let Some(i) = net.consumer_position(p.tail) {
                f[offset + i] += q[e];
            }
            if let Some(i) = net.consumer_position(p.head) {
                f[offset + i] -= q[e];
            }
        }
        f
    }

    fn jacobian(&self, x: &DVector<f64>, epsilon: f64) -> DMatrix<f64> {
        let net = self.net;
        let (_, q) = self.split(x);
        let nc = net.consumer_count();
        let np = net.pipe_count();
        let mut j = DMatrix::zeros(np + nc, nc + np);
        for (e, p) in net.pipes().iter().enumerate() {
            if let Some(i) = net.consumer_position(p.tail) {
                j[(e, i)] = 1.0;
                j[(np + i, nc + e)] = 1.0;
            }
            if let Some(i) = net.consumer_position(p.head) {
                j[(e, i)] = -1.0;
                j[(np + i, nc + e)] = -1.0;
            }
            j[(e, nc + e)] = -head_loss_slope(q[e].abs().max(epsilon), p.resistance);
        }
        j
    }

    pub(crate) fn random_start(&self, seed: u64, reservoir_heads: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let total: f64 = self.demands.iter().map(|d| d.abs()).sum();
        let scale = total.max(1.0);
        let lo = reservoir_heads.iter().copied().fold(f64::INFINITY, f64::min) - 50.0;
        let hi = reservoir_heads.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 50.0;
        let heads = (0..self.net.consumer_count()).map(|_| rng.random_range(lo..=hi)).collect();
        let flows = (0..self.net.pipe_count()).map(|_| rng.random_range(-scale..=scale)).collect();
        (heads, flows)
    }

    pub(crate) fn solve(&self, consumer_heads: Vec<f64>, flows: Vec<f64>, opts: &SolverOptions) -> NewtonOutcome {
        let mut x = DVector::from_iterator(
            consumer_heads.len() + flows.len(),
            consumer_heads.into_iter().chain(flows),
        );
        let mut f = self.residual(&x);
        let mut norm = f.amax();
        let mut iterations = 0;

        while norm > opts.tolerance && iterations < opts.max_iterations {
            let Some(step) = self.jacobian(&x, opts.zero_flow_epsilon).lu().solve(&(-&f)) else {
                break;
            };
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..=opts.max_halvings {
                let trial = &x + &step * t;
                let f_trial = self.residual(&trial);
                let trial_norm = f_trial.amax();
                if !opts.damping || trial_norm < norm {
                    accepted = Some((trial, f_trial, trial_norm));
                    break;
                }
                t *= 0.5;
            }
            let Some((next, f_next, next_norm)) = accepted else {
                break;
            };
            x = next;
            f = f_next;
            norm = next_norm;
            iterations += 1;
            log::trace!("newton step {iterations}: |F| = {norm:e}, t = {t}");
        }

        let (h, q) = self.split(&x);
        NewtonOutcome {
            consumer_heads: h.to_vec(),
            flows: q.to_vec(),
            iterations,
            residual: norm,
            converged: norm <= opts.tolerance,
        }
    }
}

//! Conservation of energy and mass on a single-orientation network.
//!
//! Sign conventions: a positive flow runs along the canonical orientation of
//! its pipe, a positive demand withdraws water from the network.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{Network, HAZEN_WILLIAMS_EXPONENT as X};

/// Residual tolerance for states built in closed form.
pub const CONSTRUCTION_TOLERANCE: f64 = 1e-12;

/// Residual tolerance for iterative solver acceptance.
pub const SOLVER_TOLERANCE: f64 = 1e-8;

/// Heads per node, flows per pipe and demands per consumer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HydraulicState {
    pub heads: Vec<f64>,
    pub flows: Vec<f64>,
    pub demands: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("state dimensions ({heads}, {flows}, {demands}) do not match network ({nodes}, {pipes}, {consumers})")]
pub struct DimensionMismatch {
    pub heads: usize,
    pub flows: usize,
    pub demands: usize,
    pub nodes: usize,
    pub pipes: usize,
    pub consumers: usize,
}

impl HydraulicState {
    pub fn check_dimensions(&self, net: &Network) -> Result<(), DimensionMismatch> {
        if self.heads.len() == net.node_count()
            && self.flows.len() == net.pipe_count()
            && self.demands.len() == net.consumer_count()
        {
            Ok(())
        } else {
            Err(DimensionMismatch {
                heads: self.heads.len(),
                flows: self.flows.len(),
                demands: self.demands.len(),
                nodes: net.node_count(),
                pipes: net.pipe_count(),
                consumers: net.consumer_count(),
            })
        }
    }
}

/// Hazen-Williams head loss `r q |q|^(x-1)`.
#[inline]
pub fn head_loss(q: f64, r: f64) -> f64 {
    r * q * q.abs().powf(X - 1.0)
}

/// Derivative of [`head_loss`] with respect to the flow, `x r |q|^(x-1)`.
#[inline]
pub fn head_loss_slope(q: f64, r: f64) -> f64 {
    X * r * q.abs().powf(X - 1.0)
}

/// Flow producing head loss `dh`: `sgn(dh) (|dh| / r)^(1/x)`.
#[inline]
pub fn invert_head_loss(dh: f64, r: f64) -> f64 {
    if dh == 0.0 {
        return 0.0;
    }
    dh.signum() * (dh.abs() / r).powf(1.0 / X)
}

/// Head loss on every pipe, `D(q) q`.
pub fn pipe_head_losses(net: &Network, flows: &[f64]) -> Vec<f64> {
    net.pipes().iter().zip(flows).map(|(p, &q)| head_loss(q, p.resistance)).collect()
}

/// Net inflow per consumer, `-B_{Vc} q`.
///
/// # Panics
/// If `flows.len() != net.pipe_count()`.
pub fn demands_from_flows(net: &Network, flows: &[f64]) -> Vec<f64> {
    assert_eq!(flows.len(), net.pipe_count(), "one flow per pipe");
    let mut demands = vec![0.0; net.consumer_count()];
    for (p, &q) in net.pipes().iter().zip(flows) {
        if let Some(i) = net.consumer_position(p.tail) {
            demands[i] -= q;
        }
        if let Some(i) = net.consumer_position(p.head) {
            demands[i] += q;
        }
    }
    demands
}

/// Energy residual per pipe: `(h_tail - h_head) - r q |q|^(x-1)`.
pub fn energy_residuals(net: &Network, heads: &[f64], flows: &[f64]) -> Vec<f64> {
    net.pipes()
        .iter()
        .zip(flows)
        .map(|(p, &q)| (heads[p.tail] - heads[p.head]) - head_loss(q, p.resistance))
        .collect()
}

/// Mass residual per consumer: `d_v - (inflow - outflow)`.
pub fn mass_residuals(net: &Network, flows: &[f64], demands: &[f64]) -> Vec<f64> {
    demands.iter().zip(demands_from_flows(net, flows)).map(|(d, balance)| d - balance).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub energy_inf_norm: f64,
    pub mass_inf_norm: f64,
    pub max_energy_pipe: String,
    pub max_mass_node: String,
}

impl ResidualReport {
    pub fn is_physically_correct(&self, tol: f64) -> bool {
        self.energy_inf_norm <= tol && self.mass_inf_norm <= tol
    }

    pub fn max_norm(&self) -> f64 {
        self.energy_inf_norm.max(self.mass_inf_norm)
    }
}

fn argmax_abs(values: &[f64]) -> (usize, f64) {
    values
        .iter()
        .map(|v| v.abs())
        .enumerate()
        .fold((0, 0.0), |best, (i, v)| if v > best.1 || v.is_nan() { (i, v) } else { best })
}

/// Infinity norms of the energy and mass residuals with their locations.
pub fn residuals(net: &Network, state: &HydraulicState) -> Result<ResidualReport, DimensionMismatch> {
    state.check_dimensions(net)?;
    let (e, energy) = argmax_abs(&energy_residuals(net, &state.heads, &state.flows));
    let (c, mass) = argmax_abs(&mass_residuals(net, &state.flows, &state.demands));
    Ok(ResidualReport {
        energy_inf_norm: energy,
        mass_inf_norm: mass,
        max_energy_pipe: net.pipes()[e].id.clone(),
        max_mass_node: net.nodes()[net.consumers()[c]].id.clone(),
    })
}

/// Neumaier-compensated sum.
fn compensated_sum(terms: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut carry) = (0.0f64, 0.0f64);
    for t in terms {
        let next = sum + t;
        if sum.abs() >= t.abs() {
            carry += (sum - next) + t;
        } else {
            carry += (t - next) + sum;
        }
        sum = next;
    }
    sum + carry
}

/// `<f(q1) - f(q2), q1 - q2>` for the head-loss operator `f(q) = D(q) q`.
///
/// Strictly positive whenever `q1 != q2`.
pub fn monotonicity_gap(net: &Network, q1: &[f64], q2: &[f64]) -> f64 {
    assert_eq!(q1.len(), net.pipe_count());
    assert_eq!(q2.len(), net.pipe_count());
    compensated_sum(net.pipes().iter().zip(q1.iter().zip(q2)).map(|(p, (&a, &b))| {
        (head_loss(a, p.resistance) - head_loss(b, p.resistance)) * (a - b)
    }))
}

/// A state expanded to the symmetric directed model: every pipe becomes the
/// edge pair `tail -> head` (index `2e`) and `head -> tail` (index `2e + 1`)
/// carrying opposite flows.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricExpansion {
    pub edges: Vec<(usize, usize)>,
    pub flows: Vec<f64>,
}

pub fn symmetric_expansion(net: &Network, flows: &[f64]) -> SymmetricExpansion {
    let mut edges = Vec::with_capacity(2 * net.pipe_count());
    let mut sym = Vec::with_capacity(2 * net.pipe_count());
    for (p, &q) in net.pipes().iter().zip(flows) {
        edges.push((p.tail, p.head));
        sym.push(q);
        edges.push((p.head, p.tail));
        sym.push(-q);
    }
    SymmetricExpansion { edges, flows: sym }
}

impl SymmetricExpansion {
    /// `B_{Vc} q` over the symmetric edge set; equals `-2 d` for a
    /// physically correct state.
    pub fn consumer_outflow(&self, net: &Network) -> Vec<f64> {
        let mut out = vec![0.0; net.consumer_count()];
        for (&(from, to), &q) in self.edges.iter().zip(&self.flows) {
            if let Some(i) = net.consumer_position(from) {
                out[i] += q;
            }
            if let Some(i) = net.consumer_position(to) {
                out[i] -= q;
            }
        }
        out
    }
}

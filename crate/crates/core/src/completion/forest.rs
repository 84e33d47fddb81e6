//! Rooted traversal of the forest `(V, Ei)`.
//!
//! With the pipes ordered from the reservoirs outward, `B_{Vc,Ei}` and its
//! transpose become triangular, so both forest systems are solved by plain
//! substitution: heads from the roots down, flows from the leaves up.

use std::collections::VecDeque;

use crate::hydraulics::head_loss;
use crate::network::Network;
use crate::structure::EdgeDecomposition;

/// One consumer reached through the forest: its pipe towards the root and
/// whether that pipe points away from the root (`parent -> child`).
#[derive(Debug, Clone, Copy)]
pub(crate) struct ForestStep {
    pub node: usize,
    pub parent: usize,
    pub pipe: usize,
    pub downstream: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct RootedForest {
    /// Breadth-first order; every parent precedes its children.
    steps: Vec<ForestStep>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum ForestDefect {
    WrongSize { expected: usize, found: usize },
    Unreached(usize),
}

impl RootedForest {
    pub(crate) fn new(net: &Network, dec: &EdgeDecomposition) -> Result<Self, ForestDefect> {
        if dec.independent.len() != net.consumer_count() {
            return Err(ForestDefect::WrongSize {
                expected: net.consumer_count(),
                found: dec.independent.len(),
            });
        }
        let mut adjacent = vec![Vec::new(); net.node_count()];
        for &e in &dec.independent {
            let p = &net.pipes()[e];
            adjacent[p.tail].push((e, p.head));
            adjacent[p.head].push((e, p.tail));
        }
        let mut seen = vec![false; net.node_count()];
        let mut queue: VecDeque<usize> = net.reservoirs().iter().copied().collect();
        for &r in net.reservoirs() {
            seen[r] = true;
        }
        let mut steps = Vec::with_capacity(net.consumer_count());
        while let Some(u) = queue.pop_front() {
            for &(e, v) in &adjacent[u] {
                if !seen[v] {
                    seen[v] = true;
                    steps.push(ForestStep { node: v, parent: u, pipe: e, downstream: net.pipes()[e].tail == u });
                    queue.push_back(v);
                }
            }
        }
        // n_c pipes reaching n_c consumers from the reservoirs cannot close a cycle
        match net.consumers().iter().find(|&&v| !seen[v]) {
            Some(&v) => Err(ForestDefect::Unreached(v)),
            None => Ok(Self { steps }),
        }
    }

    /// Heads at every node from reservoir heads and forest flows
    /// (`B_{Vc,Ei}^T h_Vc = D q_Ei - B_{Vr,Ei}^T h_Vr`). Entries of `heads`
    /// at reservoirs must be set; consumer entries are overwritten.
    pub(crate) fn propagate_heads(&self, net: &Network, flows: &[f64], heads: &mut [f64]) {
        for s in &self.steps {
            let loss = head_loss(flows[s.pipe], net.pipes()[s.pipe].resistance);
            heads[s.node] = if s.downstream { heads[s.parent] - loss } else { heads[s.parent] + loss };
        }
    }

    /// Forest flows meeting the demands with the given chord flows fixed
    /// (`B_{Vc,Ei} q_Ei = -d - B_{Vc,Ed} q_Ed`). Forest entries of `flows`
    /// are overwritten.
    pub(crate) fn balance_flows(&self, net: &Network, demands: &[f64], flows: &mut [f64]) {
        // inflow each consumer needs through its parent pipe
        let mut need = vec![0.0; net.node_count()];
        for (pos, &v) in net.consumers().iter().enumerate() {
            need[v] = demands[pos];
        }
        let mut is_forest = vec![false; net.pipe_count()];
        for s in &self.steps {
            is_forest[s.pipe] = true;
        }
        for (e, p) in net.pipes().iter().enumerate() {
            if !is_forest[e] {
                // chord flow leaves its tail and enters its head
                need[p.tail] += flows[e];
                need[p.head] -= flows[e];
            }
        }
        for s in self.steps.iter().rev() {
            let inflow = need[s.node];
            flows[s.pipe] = if s.downstream { inflow } else { -inflow };
            need[s.parent] += inflow;
        }
    }
}

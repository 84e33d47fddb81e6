//! State completion: recover the whole hydraulic state from one of the
//! observation subsets that determine it uniquely.
//!
//! | observed                               | solver                                      |
//! |----------------------------------------|---------------------------------------------|
//! | all heads                              | [`complete_from_heads`]                     |
//! | reservoir heads, all flows             | [`complete_from_reservoir_heads_and_flows`] |
//! | reservoir heads, flows on a forest     | [`complete_from_forest_flows`]              |
//! | reservoir heads, all demands           | [`solve_reservoir_heads_demands`]           |

mod forest;
mod newton;
mod observations;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hydraulics::{
    demands_from_flows, head_loss, invert_head_loss, residuals, DimensionMismatch, HydraulicState,
    ResidualReport,
};
use crate::network::Network;
use crate::structure::{image_membership, select_from, EdgeDecomposition, ImageMembership, IMAGE_TOLERANCE};

use forest::{ForestDefect, RootedForest};
use newton::DemandProblem;

pub use newton::{InitialStrategy, SolverOptions};
pub use observations::{ObservationError, ObservationSet, ResolvedObservations};

/// Which uniqueness result a completion relies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Theorem {
    AllHeads,
    HeadsAndFlows,
    ForestFlows,
    DemandDriven,
}

impl Theorem {
    pub const ALL: [Theorem; 4] =
        [Theorem::AllHeads, Theorem::HeadsAndFlows, Theorem::ForestFlows, Theorem::DemandDriven];

    pub fn name(self) -> &'static str {
        match self {
            Theorem::AllHeads => "all-heads",
            Theorem::HeadsAndFlows => "heads-flows",
            Theorem::ForestFlows => "forest-flows",
            Theorem::DemandDriven => "demand-driven",
        }
    }
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub state: HydraulicState,
    pub iterations: usize,
    pub final_residual: ResidualReport,
    pub theorem: Theorem,
    /// Non-fatal findings, e.g. negative computed heads.
    pub warnings: Vec<String>,
}

/// JSON form of a [`SolveReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReportRecord {
    pub theorem: Theorem,
    pub iterations: usize,
    pub state: ObservationSet,
    pub residual: ResidualReport,
    pub warnings: Vec<String>,
}

impl SolveReport {
    pub fn to_record(&self, net: &Network) -> SolveReportRecord {
        SolveReportRecord {
            theorem: self.theorem,
            iterations: self.iterations,
            state: ObservationSet::from_state(net, &self.state),
            residual: self.final_residual.clone(),
            warnings: self.warnings.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompletionError {
    #[error(transparent)]
    Dimension(#[from] DimensionMismatch),
    #[error("expected {expected} {what}, got {found}")]
    WrongLength { what: &'static str, expected: usize, found: usize },
    #[error("observations admit no physically correct state (residual {residual:e}): {detail}")]
    InconsistentObservations { residual: f64, detail: String },
    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("forest flows must be given exactly on the independent pipes: {0}")]
    DecompositionMismatch(String),
    #[error("missing observation: {0}")]
    MissingObservation(String),
    #[error(transparent)]
    Observation(#[from] ObservationError),
}

fn expect_len(what: &'static str, values: &[f64], expected: usize) -> Result<(), CompletionError> {
    if values.len() == expected {
        Ok(())
    } else {
        Err(CompletionError::WrongLength { what, expected, found: values.len() })
    }
}

fn finish(net: &Network, state: HydraulicState, iterations: usize, theorem: Theorem) -> SolveReport {
    let final_residual = residuals(net, &state).expect("solver produced consistent dimensions");
    let warnings: Vec<String> = state
        .heads
        .iter()
        .enumerate()
        .filter(|(_, &h)| h < 0.0)
        .map(|(v, h)| format!("negative head {h} at node `{}`", net.nodes()[v].id))
        .collect();
    for w in &warnings {
        log::warn!("{w}");
    }
    SolveReport { state, iterations, final_residual, theorem, warnings }
}

/// Flows and demands from a full head vector, in closed form.
pub fn complete_from_heads(net: &Network, heads: &[f64]) -> Result<SolveReport, CompletionError> {
    expect_len("heads", heads, net.node_count())?;
    let flows: Vec<f64> = net
        .pipes()
        .iter()
        .map(|p| invert_head_loss(heads[p.tail] - heads[p.head], p.resistance))
        .collect();
    let demands = demands_from_flows(net, &flows);
    let state = HydraulicState { heads: heads.to_vec(), flows, demands };
    Ok(finish(net, state, 0, Theorem::AllHeads))
}

/// Consumer heads and demands from reservoir heads and every flow.
///
/// Solvable iff `D(q) q - B_Vr^T h_Vr` lies in the image of `B_Vc^T`; the
/// membership test uses relative tolerance `tol`.
pub fn complete_from_reservoir_heads_and_flows(
    net: &Network,
    reservoir_heads: &[f64],
    flows: &[f64],
    tol: f64,
) -> Result<SolveReport, CompletionError> {
    expect_len("reservoir heads", reservoir_heads, net.reservoir_count())?;
    expect_len("flows", flows, net.pipe_count())?;
    let heads_r = net.assemble_heads(reservoir_heads, &vec![0.0; net.consumer_count()]);
    let target: Vec<f64> = net
        .pipes()
        .iter()
        .zip(flows)
        .map(|(p, &q)| {
            let side = |v: usize| if net.is_consumer(v) { 0.0 } else { heads_r[v] };
            head_loss(q, p.resistance) - (side(p.tail) - side(p.head))
        })
        .collect();
    match image_membership(net, &target, tol) {
        ImageMembership::Member { consumer_heads, .. } => {
            let heads = net.assemble_heads(reservoir_heads, &consumer_heads);
            let demands = demands_from_flows(net, flows);
            Ok(finish(net, HydraulicState { heads, flows: flows.to_vec(), demands }, 0, Theorem::HeadsAndFlows))
        }
        ImageMembership::NotMember { residual, relative_residual } => {
            Err(CompletionError::InconsistentObservations {
                residual,
                detail: format!(
                    "head-loss vector is not in the image of B_Vc^T (relative residual {relative_residual:e} > {tol:e})"
                ),
            })
        }
    }
}

/// Consumer heads, chord flows and demands from reservoir heads and the
/// flows on the independent pipes of `dec`.
pub fn complete_from_forest_flows(
    net: &Network,
    reservoir_heads: &[f64],
    forest_flows: &BTreeMap<usize, f64>,
    dec: &EdgeDecomposition,
) -> Result<SolveReport, CompletionError> {
    expect_len("reservoir heads", reservoir_heads, net.reservoir_count())?;
    let keys: Vec<usize> = forest_flows.keys().copied().collect();
    let mut expected = dec.independent.clone();
    expected.sort_unstable();
    if keys != expected {
        return Err(CompletionError::DecompositionMismatch(format!(
            "got pipes {keys:?}, independent pipes are {expected:?}"
        )));
    }
    let forest = RootedForest::new(net, dec).map_err(|defect| {
        CompletionError::DecompositionMismatch(match defect {
            ForestDefect::WrongSize { expected, found } => {
                format!("{found} independent pipes for {expected} consumers")
            }
            ForestDefect::Unreached(v) => {
                format!("consumer `{}` is not connected to a reservoir by the forest", net.nodes()[v].id)
            }
        })
    })?;

    let mut flows = vec![0.0; net.pipe_count()];
    for (&e, &q) in forest_flows {
        flows[e] = q;
    }
    let mut heads = net.assemble_heads(reservoir_heads, &vec![0.0; net.consumer_count()]);
    forest.propagate_heads(net, &flows, &mut heads);
    for &e in &dec.dependent {
        let p = &net.pipes()[e];
        flows[e] = invert_head_loss(heads[p.tail] - heads[p.head], p.resistance);
    }
    let demands = demands_from_flows(net, &flows);
    Ok(finish(net, HydraulicState { heads, flows, demands }, 0, Theorem::ForestFlows))
}

/// Consumer heads and flows from reservoir heads and every demand, by a
/// damped Newton iteration on the coupled energy and mass equations.
pub fn solve_reservoir_heads_demands(
    net: &Network,
    reservoir_heads: &[f64],
    demands: &[f64],
    opts: &SolverOptions,
) -> Result<SolveReport, CompletionError> {
    expect_len("reservoir heads", reservoir_heads, net.reservoir_count())?;
    expect_len("demands", demands, net.consumer_count())?;
    let problem = DemandProblem::new(net, reservoir_heads, demands);

    let (consumer_heads, flows) = match &opts.initial_strategy {
        InitialStrategy::ForestFeasible => forest_feasible_start(net, reservoir_heads, demands),
        InitialStrategy::Random { seed } => problem.random_start(*seed, reservoir_heads),
        InitialStrategy::Supplied { consumer_heads, flows } => {
            expect_len("initial consumer heads", consumer_heads, net.consumer_count())?;
            expect_len("initial flows", flows, net.pipe_count())?;
            (consumer_heads.clone(), flows.clone())
        }
    };

    let outcome = problem.solve(consumer_heads, flows, opts);
    if !outcome.converged {
        return Err(CompletionError::NonConvergence {
            iterations: outcome.iterations,
            residual: outcome.residual,
        });
    }
    let heads = net.assemble_heads(reservoir_heads, &outcome.consumer_heads);
    let state = HydraulicState { heads, flows: outcome.flows, demands: demands.to_vec() };
    Ok(finish(net, state, outcome.iterations, Theorem::DemandDriven))
}

fn forest_feasible_start(net: &Network, reservoir_heads: &[f64], demands: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let dec = crate::structure::select_independent_edges(net);
    let forest = RootedForest::new(net, &dec).expect("greedy decomposition spans every consumer");
    let mut flows = vec![0.0; net.pipe_count()];
    forest.balance_flows(net, demands, &mut flows);
    let mut heads = net.assemble_heads(reservoir_heads, &vec![0.0; net.consumer_count()]);
    forest.propagate_heads(net, &flows, &mut heads);
    // Zero chord flows sit where the head-loss slope vanishes, and the clamped
    // Jacobian then proposes steps too long for the line search to recover.
    // One sweep moves the chords onto the forest head drops and rebalances.
    for &e in &dec.dependent {
        let p = &net.pipes()[e];
        flows[e] = invert_head_loss(heads[p.tail] - heads[p.head], p.resistance);
    }
    forest.balance_flows(net, demands, &mut flows);
    forest.propagate_heads(net, &flows, &mut heads);
    (net.consumer_heads(&heads), flows)
}

/// Default relative tolerance when comparing surplus observations with a
/// completed state.
pub const CONSISTENCY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionOptions {
    pub solver: SolverOptions,
    /// Relative tolerance of the image test for the heads-and-flows case.
    pub image_tolerance: f64,
    /// Relative tolerance for observations the chosen solver does not consume.
    pub consistency_tolerance: f64,
}

impl Default for CompletionOptions {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            image_tolerance: IMAGE_TOLERANCE,
            consistency_tolerance: CONSISTENCY_TOLERANCE,
        }
    }
}

/// Run the solver for `theorem` on an observation set.
///
/// Observations beyond what the theorem consumes must agree with the
/// completed state to `consistency_tolerance` (relative to
/// `max(1, |value|)`), otherwise the set is reported inconsistent.
pub fn complete(
    net: &Network,
    obs: &ObservationSet,
    theorem: Theorem,
    opts: &CompletionOptions,
) -> Result<SolveReport, CompletionError> {
    let resolved = obs.resolve(net)?;
    let mut heads = vec![None; net.node_count()];
    for &(v, h) in &resolved.heads {
        heads[v] = Some(h);
    }
    let missing = |what: String| CompletionError::MissingObservation(what);
    let reservoir_heads = || -> Result<Vec<f64>, CompletionError> {
        net.reservoirs()
            .iter()
            .map(|&v| heads[v].ok_or_else(|| missing(format!("head at reservoir `{}`", net.nodes()[v].id))))
            .collect()
    };

    let report = match theorem {
        Theorem::AllHeads => {
            let all = (0..net.node_count())
                .map(|v| heads[v].ok_or_else(|| missing(format!("head at `{}`", net.nodes()[v].id))))
                .collect::<Result<Vec<_>, _>>()?;
            complete_from_heads(net, &all)?
        }
        Theorem::HeadsAndFlows => {
            let mut flows = vec![None; net.pipe_count()];
            for &(e, q) in &resolved.flows {
                flows[e] = Some(q);
            }
            let flows = flows
                .iter()
                .enumerate()
                .map(|(e, q)| q.ok_or_else(|| missing(format!("flow on `{}`", net.pipes()[e].id))))
                .collect::<Result<Vec<_>, _>>()?;
            complete_from_reservoir_heads_and_flows(net, &reservoir_heads()?, &flows, opts.image_tolerance)?
        }
        Theorem::ForestFlows => {
            let mut candidates: Vec<usize> = resolved.flow_pipes().collect();
            candidates.sort_unstable();
            let dec = select_from(net, candidates);
            if dec.independent.len() < net.consumer_count() {
                return Err(missing(format!(
                    "observed flows span rank {} of the {} consumers",
                    dec.independent.len(),
                    net.consumer_count()
                )));
            }
            let lookup: BTreeMap<usize, f64> = resolved.flows.iter().copied().collect();
            let forest_flows = dec.independent.iter().map(|&e| (e, lookup[&e])).collect();
            complete_from_forest_flows(net, &reservoir_heads()?, &forest_flows, &dec)?
        }
        Theorem::DemandDriven => {
            let mut demands = vec![None; net.consumer_count()];
            for &(c, d) in &resolved.demands {
                demands[c] = Some(d);
            }
            let demands = demands
                .iter()
                .enumerate()
                .map(|(c, d)| {
                    d.ok_or_else(|| missing(format!("demand at `{}`", net.nodes()[net.consumers()[c]].id)))
                })
                .collect::<Result<Vec<_>, _>>()?;
            solve_reservoir_heads_demands(net, &reservoir_heads()?, &demands, &opts.solver)?
        }
    };

    check_surplus(net, &resolved, &report.state, opts.consistency_tolerance)?;
    Ok(report)
}

fn check_surplus(
    net: &Network,
    resolved: &ResolvedObservations,
    state: &HydraulicState,
    tol: f64,
) -> Result<(), CompletionError> {
    let deviations = resolved
        .heads
        .iter()
        .map(|&(v, h)| (format!("head at `{}`", net.nodes()[v].id), h, state.heads[v]))
        .chain(resolved.flows.iter().map(|&(e, q)| (format!("flow on `{}`", net.pipes()[e].id), q, state.flows[e])))
        .chain(resolved.demands.iter().map(|&(c, d)| {
            (format!("demand at `{}`", net.nodes()[net.consumers()[c]].id), d, state.demands[c])
        }));
    let worst = deviations
        .map(|(what, observed, completed)| ((observed - completed).abs() / observed.abs().max(1.0), what))
        .fold(None, |acc: Option<(f64, String)>, (dev, what)| match acc {
            Some((best, _)) if best >= dev => acc,
            _ => Some((dev, what)),
        });
    match worst {
        Some((dev, what)) if dev > tol => Err(CompletionError::InconsistentObservations {
            residual: dev,
            detail: format!("observed {what} disagrees with the completed state"),
        }),
        _ => Ok(()),
    }
}

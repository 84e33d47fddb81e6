//! Steady-state hydraulic state completion for water distribution networks.
//!
//! A network is a connected graph of reservoirs and consumer junctions joined
//! by pipes with Hazen-Williams head loss. Given a sufficient subset of heads,
//! flows and demands, the [`completion`] solvers recover the rest of the
//! physically correct state, and [`observability`] decides from the observed
//! key sets alone whether a unique completion is guaranteed.

pub mod completion;
mod exact;
pub mod hydraulics;
pub mod network;
pub mod observability;
pub mod structure;
pub mod testkit;

pub use completion::{
    complete, complete_from_forest_flows, complete_from_heads, complete_from_reservoir_heads_and_flows,
    solve_reservoir_heads_demands, CompletionError, CompletionOptions, InitialStrategy, ObservationSet,
    SolveReport, SolverOptions, Theorem,
};
pub use hydraulics::{
    demands_from_flows, head_loss, invert_head_loss, monotonicity_gap, residuals, HydraulicState, ResidualReport,
};
pub use network::{
    build_network, incidence_matrix, resistance, IncidenceMatrix, Network, NetworkError, NetworkSpec, NodeRole,
    PipeParams,
};
pub use observability::{classify_observation_pattern, ObservabilityVerdict, Verdict};
pub use structure::{
    cycle_space_basis, image_membership, select_independent_edges, submatrix_rank, CycleBasis, EdgeDecomposition,
    ImageMembership,
};

/// Exact integer linear algebra used for rank and determinant checks.
pub mod exact_arith {
    pub use crate::exact::{determinant, mul_vec, rank};
}

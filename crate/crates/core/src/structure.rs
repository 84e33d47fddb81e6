//! Linear-algebraic structure of the incidence matrix restricted to
//! consumer rows: ranks, the forest/chord split of the pipes, the cycle
//! space, and membership in the image of `B_{Vc}^T`.

use nalgebra::{DMatrix, DVector};
use petgraph::unionfind::UnionFind;
use serde::Serialize;
use thiserror::Error;

use crate::exact;
use crate::network::{IncidenceMatrix, Network};

/// Default relative tolerance for [`image_membership`].
pub const IMAGE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StructureError {
    #[error("node subset is empty")]
    EmptySubset,
    #[error("node subset covers every node; rank is {rank}")]
    FullNodeSet { rank: usize },
    #[error("node index {0} out of range")]
    NodeOutOfRange(usize),
}

/// Exact rank of the rows of `b` indexed by `rows`.
///
/// For a nonempty proper subset of the nodes of a connected network this is
/// always `|rows|`; the full node set has rank `n_n - 1` and is reported
/// through [`StructureError::FullNodeSet`].
pub fn submatrix_rank(b: &IncidenceMatrix, rows: &[usize]) -> Result<usize, StructureError> {
    let mut subset = rows.to_vec();
    subset.sort_unstable();
    subset.dedup();
    if subset.is_empty() {
        return Err(StructureError::EmptySubset);
    }
    if let Some(&bad) = subset.iter().find(|&&r| r >= b.rows()) {
        return Err(StructureError::NodeOutOfRange(bad));
    }
    let rank = exact::rank(&b.restrict_rows(&subset));
    if subset.len() == b.rows() {
        return Err(StructureError::FullNodeSet { rank });
    }
    debug_assert_eq!(rank, subset.len(), "proper node subset of a connected graph lost rank");
    Ok(rank)
}

/// Split of the pipes into `n_c` independent (forest) pipes and the
/// remaining dependent (chord) pipes of `B_{Vc}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EdgeDecomposition {
    /// Pipe indices of the forest, in canonical order.
    pub independent: Vec<usize>,
    /// Pipe indices of the chords, in canonical order.
    pub dependent: Vec<usize>,
}

impl EdgeDecomposition {
    pub fn independent_ids<'a>(&self, net: &'a Network) -> Vec<&'a str> {
        self.independent.iter().map(|&e| net.pipes()[e].id.as_str()).collect()
    }

    pub fn dependent_ids<'a>(&self, net: &'a Network) -> Vec<&'a str> {
        self.dependent.iter().map(|&e| net.pipes()[e].id.as_str()).collect()
    }
}

/// Greedy rank-increasing scan over a sequence of pipes.
///
/// A column of `B_{Vc}` is independent of the accepted ones iff the pipe
/// does not close a cycle once all reservoirs are collapsed into a single
/// ground node, so a union-find over that contracted graph decides each step.
pub(crate) struct ForestBuilder {
    sets: UnionFind<usize>,
    ground: usize,
    reservoir_flag: Vec<bool>,
}

impl ForestBuilder {
    pub(crate) fn new(net: &Network) -> Self {
        let n = net.node_count();
        let reservoir_flag = (0..n).map(|v| !net.is_consumer(v)).collect();
        Self { sets: UnionFind::new(n + 1), ground: n, reservoir_flag }
    }

    fn class(&self, v: usize) -> usize {
        if self.reservoir_flag[v] {
            self.ground
        } else {
            v
        }
    }

    /// Accepts the pipe if it raises the rank; returns whether it did.
    pub(crate) fn offer(&mut self, tail: usize, head: usize) -> bool {
        let (a, b) = (self.class(tail), self.class(head));
        self.sets.union(a, b)
    }
}

/// Rank of the columns of `B_{Vc}` for the given pipes.
pub fn consumer_column_rank(net: &Network, pipes: &[usize]) -> usize {
    let mut forest = ForestBuilder::new(net);
    pipes
        .iter()
        .filter(|&&e| {
            let p = &net.pipes()[e];
            forest.offer(p.tail, p.head)
        })
        .count()
}

/// Deterministic greedy choice of `n_c` independent pipes in canonical order.
pub fn select_independent_edges(net: &Network) -> EdgeDecomposition {
    select_from(net, 0..net.pipe_count())
}

/// Greedy choice among a candidate pipe sequence; pipes that are not
/// candidates always land in `dependent`.
pub(crate) fn select_from(net: &Network, candidates: impl IntoIterator<Item = usize>) -> EdgeDecomposition {
    let mut forest = ForestBuilder::new(net);
    let mut chosen = vec![false; net.pipe_count()];
    for e in candidates {
        let p = &net.pipes()[e];
        if forest.offer(p.tail, p.head) {
            chosen[e] = true;
        }
    }
    let (independent, dependent) = (0..net.pipe_count()).partition(|&e| chosen[e]);
    EdgeDecomposition { independent, dependent }
}

/// Basis of `ker(B_{Vc})`, one fundamental cycle per chord.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CycleBasis {
    /// Each vector has one integer coefficient per pipe.
    pub vectors: Vec<Vec<i64>>,
}

impl CycleBasis {
    pub fn dimension(&self) -> usize {
        self.vectors.len()
    }
}

/// Fundamental cycles with respect to [`select_independent_edges`]: for
/// chord `e` the vector has coefficient 1 on `e`, `B_{Vc,Ei}^{-1}`-balanced
/// coefficients on the forest, and zero elsewhere. Solved over the rationals.
pub fn cycle_space_basis(net: &Network) -> CycleBasis {
    cycle_space_basis_for(net, &select_independent_edges(net))
}

pub fn cycle_space_basis_for(net: &Network, dec: &EdgeDecomposition) -> CycleBasis {
    let b = crate::network::incidence_matrix(net);
    let consumers = net.consumers();
    let forest = b.submatrix(consumers, &dec.independent);
    // right-hand sides -B_{Vc,e} for every chord e
    let rhs: Vec<Vec<i64>> = b
        .submatrix(consumers, &dec.dependent)
        .into_iter()
        .map(|row| row.into_iter().map(|v| -v).collect())
        .collect();
    let solution = exact::solve_rational_multi(&forest, &rhs)
        .expect("forest columns of B_Vc are nonsingular");

    let vectors = dec
        .dependent
        .iter()
        .enumerate()
        .map(|(k, &chord)| {
            let mut v = vec![0i64; net.pipe_count()];
            v[chord] = 1;
            for (row, &e) in dec.independent.iter().enumerate() {
                let c = solution[row][k];
                assert!(c.is_integer(), "non-integral cycle coefficient {c}");
                v[e] = i64::try_from(c.to_integer()).expect("cycle coefficient overflow");
            }
            v
        })
        .collect();
    CycleBasis { vectors }
}

/// Outcome of the least-squares test `target ∈ im(B_{Vc}^T)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ImageMembership {
    /// `consumer_heads` solves `B_{Vc}^T h = target` up to `residual`.
    Member { consumer_heads: Vec<f64>, residual: f64, relative_residual: f64 },
    NotMember { residual: f64, relative_residual: f64 },
}

impl ImageMembership {
    pub fn is_member(&self) -> bool {
        matches!(self, ImageMembership::Member { .. })
    }

    pub fn relative_residual(&self) -> f64 {
        match self {
            ImageMembership::Member { relative_residual, .. }
            | ImageMembership::NotMember { relative_residual, .. } => *relative_residual,
        }
    }
}

/// `B_{Vc}^T` as a dense `n_p x n_c` matrix.
pub(crate) fn consumer_incidence_transpose(net: &Network) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(net.pipe_count(), net.consumer_count());
    for (e, p) in net.pipes().iter().enumerate() {
        if let Some(i) = net.consumer_position(p.tail) {
            m[(e, i)] = 1.0;
        }
        if let Some(i) = net.consumer_position(p.head) {
            m[(e, i)] = -1.0;
        }
    }
    m
}

/// Least-squares solve of `B_{Vc}^T h = target` by Householder QR.
///
/// The minimizer is unique since `B_{Vc}^T` has full column rank. The
/// target is accepted iff `|B_{Vc}^T h - target|_inf / max(1, |target|_inf)`
/// does not exceed `tol`.
///
/// # Panics
/// If `target.len() != net.pipe_count()`.
pub fn image_membership(net: &Network, target: &[f64], tol: f64) -> ImageMembership {
    assert_eq!(target.len(), net.pipe_count(), "target must have one entry per pipe");
    let a = consumer_incidence_transpose(net);
    let rhs = DVector::from_column_slice(target);
    let qr = a.clone().qr();
    let qtb = qr.q().transpose() * &rhs;
    let h = qr
        .r()
        .solve_upper_triangular(&qtb)
        .expect("B_Vc^T has full column rank");

    let residual = (&a * &h - &rhs).amax();
    let relative_residual = residual / rhs.amax().max(1.0);
    if relative_residual <= tol {
        ImageMembership::Member { consumer_heads: h.iter().copied().collect(), residual, relative_residual }
    } else {
        ImageMembership::NotMember { residual, relative_residual }
    }
}

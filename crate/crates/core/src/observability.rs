//! Structural classification of observation patterns.
//!
//! Only the key sets of an [`ObservationSet`] matter here; values are never
//! inspected. Value-dependent solvability is reported as a proviso.

use serde::{Deserialize, Serialize};

use crate::completion::{ObservationError, ObservationSet, Theorem};
use crate::network::Network;
use crate::structure::select_from;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    DeterminedAllHeads,
    DeterminedForestFlows,
    ConditionallyDeterminedFlows,
    DeterminedDemandDriven,
    UndeterminedRankDeficient,
    NotCovered,
}

impl Verdict {
    pub fn is_determined(self) -> bool {
        matches!(
            self,
            Verdict::DeterminedAllHeads | Verdict::DeterminedForestFlows | Verdict::DeterminedDemandDriven
        )
    }

    /// The completion routine matching this verdict, if any.
    pub fn theorem(self) -> Option<Theorem> {
        match self {
            Verdict::DeterminedAllHeads => Some(Theorem::AllHeads),
            Verdict::DeterminedForestFlows => Some(Theorem::ForestFlows),
            Verdict::ConditionallyDeterminedFlows => Some(Theorem::HeadsAndFlows),
            Verdict::DeterminedDemandDriven => Some(Theorem::DemandDriven),
            Verdict::UndeterminedRankDeficient | Verdict::NotCovered => None,
        }
    }
}

/// How a pattern that observes every flow is framed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FlowFraming {
    /// Any independent subset of the observed flows acts as the forest.
    #[default]
    Forest,
    /// Every flow is used; existence depends on the observed values.
    FullFlows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservabilityVerdict {
    pub verdict: Verdict,
    pub detail: String,
    /// Rank of the `B_Vc` columns of the observed flows.
    pub flow_rank: usize,
    pub consumer_count: usize,
    /// Forest pipes picked from the observed flows, when they reach full rank.
    pub independent_flows: Vec<String>,
    pub missing_reservoir_heads: Vec<String>,
    /// Value-dependent condition attached to the verdict.
    pub proviso: Option<String>,
}

pub fn classify_observation_pattern(
    net: &Network,
    pattern: &ObservationSet,
) -> Result<ObservabilityVerdict, ObservationError> {
    classify_with_framing(net, pattern, FlowFraming::Forest)
}

/// Decision procedure, first match wins:
///
/// 1. every head known: all heads;
/// 2. reservoir heads and every demand known: demand driven;
/// 3. reservoir heads and every flow known, full-flow framing requested:
///    conditionally determined;
/// 4. reservoir heads and flows whose `B_Vc` columns have rank `n_c`:
///    forest flows;
/// 5. reservoir heads and rank-deficient flows, nothing else observed:
///    undetermined;
/// 6. anything else: not covered.
pub fn classify_with_framing(
    net: &Network,
    pattern: &ObservationSet,
    framing: FlowFraming,
) -> Result<ObservabilityVerdict, ObservationError> {
    let resolved = pattern.resolve(net)?;
    let mut head_known = vec![false; net.node_count()];
    for v in resolved.head_nodes() {
        head_known[v] = true;
    }
    let mut flow_pipes: Vec<usize> = resolved.flow_pipes().collect();
    flow_pipes.sort_unstable();
    flow_pipes.dedup();
    let mut demand_known = vec![false; net.consumer_count()];
    for &(c, _) in &resolved.demands {
        demand_known[c] = true;
    }

    let dec = select_from(net, flow_pipes.iter().copied());
    let flow_rank = dec.independent.len();
    let n_c = net.consumer_count();
    let missing_reservoir_heads: Vec<String> = net
        .reservoirs()
        .iter()
        .filter(|&&v| !head_known[v])
        .map(|&v| net.nodes()[v].id.clone())
        .collect();

    let mut out = ObservabilityVerdict {
        verdict: Verdict::NotCovered,
        detail: String::new(),
        flow_rank,
        consumer_count: n_c,
        independent_flows: Vec::new(),
        missing_reservoir_heads,
        proviso: None,
    };

    if head_known.iter().all(|&k| k) {
        out.verdict = Verdict::DeterminedAllHeads;
        out.detail = "all heads observed; flows and demands follow in closed form".into();
        return Ok(out);
    }
    if !out.missing_reservoir_heads.is_empty() {
        out.detail = format!(
            "reservoir heads missing at {}; no uniqueness result covers this pattern",
            out.missing_reservoir_heads.join(", ")
        );
        return Ok(out);
    }
    if demand_known.iter().all(|&k| k) {
        out.verdict = Verdict::DeterminedDemandDriven;
        out.detail = "reservoir heads and all demands observed; unique solution of the nonlinear network equations".into();
        return Ok(out);
    }
    if framing == FlowFraming::FullFlows && flow_pipes.len() == net.pipe_count() {
        out.verdict = Verdict::ConditionallyDeterminedFlows;
        out.detail = "reservoir heads and all flows observed".into();
        out.proviso = Some(
            "a completion exists iff D(q) q - B_Vr^T h_Vr lies in the image of B_Vc^T; it is then unique".into(),
        );
        return Ok(out);
    }
    if flow_rank == n_c {
        out.verdict = Verdict::DeterminedForestFlows;
        out.independent_flows = dec.independent_ids(net).into_iter().map(str::to_owned).collect();
        out.detail = format!("observed flows contain a forest of {n_c} independent pipes");
        if flow_pipes.len() > n_c {
            out.proviso = Some(format!(
                "{} surplus observed flows must agree with the completion from the forest",
                flow_pipes.len() - n_c
            ));
        }
        return Ok(out);
    }
    let consumer_heads_known = net.consumers().iter().any(|&v| head_known[v]);
    let any_demand = demand_known.iter().any(|&k| k);
    if !consumer_heads_known && !any_demand {
        out.verdict = Verdict::UndeterminedRankDeficient;
        out.detail = format!(
            "observed flows reach rank {flow_rank} < {n_c}; consumer heads are not determined"
        );
        return Ok(out);
    }
    out.detail = "mixed partial heads, flows and demands; no uniqueness result covers this pattern".into();
    Ok(out)
}

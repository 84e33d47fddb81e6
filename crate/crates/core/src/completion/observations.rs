use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hydraulics::HydraulicState;
use crate::network::Network;

/// Known heads, flows and demands keyed by node or pipe id.
///
/// The JSON form is `{"heads":{..},"flows":{..},"demands":{..}}`; a complete
/// observation set doubles as the serialized form of a [`HydraulicState`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ObservationSet {
    #[serde(rename = "heads", default)]
    pub known_heads: IndexMap<String, f64>,
    #[serde(rename = "flows", default)]
    pub known_flows: IndexMap<String, f64>,
    #[serde(rename = "demands", default)]
    pub known_demands: IndexMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ObservationError {
    #[error("observed head at unknown node `{0}`")]
    UnknownNode(String),
    #[error("observed flow on unknown pipe `{0}`")]
    UnknownPipe(String),
    #[error("demand observed at `{0}`, which is not a consumer")]
    DemandAtReservoir(String),
    #[error("state is incomplete: missing {0}")]
    Incomplete(String),
    #[error("non-finite observation for `{0}`")]
    NonFinite(String),
}

/// Observation key sets resolved to node, pipe and consumer indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResolvedObservations {
    /// `(node, value)` in observation order.
    pub heads: Vec<(usize, f64)>,
    /// `(pipe, value)` in observation order.
    pub flows: Vec<(usize, f64)>,
    /// `(consumer position, value)` in observation order.
    pub demands: Vec<(usize, f64)>,
}

impl ResolvedObservations {
    pub fn head_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.heads.iter().map(|&(v, _)| v)
    }

    pub fn flow_pipes(&self) -> impl Iterator<Item = usize> + '_ {
        self.flows.iter().map(|&(e, _)| e)
    }
}

impl ObservationSet {
    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn resolve(&self, net: &Network) -> Result<ResolvedObservations, ObservationError> {
        let finite = |id: &String, v: f64| {
            if v.is_finite() {
                Ok(v)
            } else {
                Err(ObservationError::NonFinite(id.clone()))
            }
        };
        let heads = self
            .known_heads
            .iter()
            .map(|(id, &v)| {
                let node = net.node_by_id(id).ok_or_else(|| ObservationError::UnknownNode(id.clone()))?;
                Ok((node, finite(id, v)?))
            })
            .collect::<Result<_, _>>()?;
        let flows = self
            .known_flows
            .iter()
            .map(|(id, &v)| {
                let pipe = net.pipe_by_id(id).ok_or_else(|| ObservationError::UnknownPipe(id.clone()))?;
                Ok((pipe, finite(id, v)?))
            })
            .collect::<Result<_, _>>()?;
        let demands = self
            .known_demands
            .iter()
            .map(|(id, &v)| {
                let node = net.node_by_id(id).ok_or_else(|| ObservationError::UnknownNode(id.clone()))?;
                let pos = net
                    .consumer_position(node)
                    .ok_or_else(|| ObservationError::DemandAtReservoir(id.clone()))?;
                Ok((pos, finite(id, v)?))
            })
            .collect::<Result<_, _>>()?;
        Ok(ResolvedObservations { heads, flows, demands })
    }

    /// Converts a complete observation set into a state.
    pub fn to_state(&self, net: &Network) -> Result<HydraulicState, ObservationError> {
        let resolved = self.resolve(net)?;
        let mut heads = vec![None; net.node_count()];
        let mut flows = vec![None; net.pipe_count()];
        let mut demands = vec![None; net.consumer_count()];
        for (v, h) in resolved.heads {
            heads[v] = Some(h);
        }
        for (e, q) in resolved.flows {
            flows[e] = Some(q);
        }
        for (c, d) in resolved.demands {
            demands[c] = Some(d);
        }
        let missing = |what: &str, id: &str| ObservationError::Incomplete(format!("{what} `{id}`"));
        Ok(HydraulicState {
            heads: heads
                .iter()
                .enumerate()
                .map(|(v, h)| h.ok_or_else(|| missing("head at", &net.nodes()[v].id)))
                .collect::<Result<_, _>>()?,
            flows: flows
                .iter()
                .enumerate()
                .map(|(e, q)| q.ok_or_else(|| missing("flow on", &net.pipes()[e].id)))
                .collect::<Result<_, _>>()?,
            demands: demands
                .iter()
                .enumerate()
                .map(|(c, d)| d.ok_or_else(|| missing("demand at", &net.nodes()[net.consumers()[c]].id)))
                .collect::<Result<_, _>>()?,
        })
    }

    /// Full observation set for a state, in canonical order.
    pub fn from_state(net: &Network, state: &HydraulicState) -> Self {
        Self {
            known_heads: net.nodes().iter().map(|n| n.id.clone()).zip(state.heads.iter().copied()).collect(),
            known_flows: net.pipes().iter().map(|p| p.id.clone()).zip(state.flows.iter().copied()).collect(),
            known_demands: net
                .consumers()
                .iter()
                .map(|&v| net.nodes()[v].id.clone())
                .zip(state.demands.iter().copied())
                .collect(),
        }
    }
}

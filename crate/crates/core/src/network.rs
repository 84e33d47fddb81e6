//! Graph model of a water distribution system.
//!
//! Every physical pipe is stored once, with a canonical orientation
//! `tail -> head`. The reverse edge of the symmetric directed model is
//! implied; flows against the canonical orientation are negative.

use std::collections::HashMap;
use std::fmt;

use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hazen-Williams exponent.
pub const HAZEN_WILLIAMS_EXPONENT: f64 = 1.852;

/// SI Hazen-Williams coefficient.
pub const HAZEN_WILLIAMS_COEFFICIENT: f64 = 10.67;

/// Diameter exponent of the SI Hazen-Williams resistance.
pub const DIAMETER_EXPONENT: f64 = -4.8704;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeRole {
    Reservoir,
    Consumer,
}

/// Physical pipe features in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipeParams {
    pub length: f64,
    pub diameter: f64,
    /// Dimensionless Hazen-Williams roughness coefficient.
    pub roughness: f64,
}

impl PipeParams {
    pub fn new(length: f64, diameter: f64, roughness: f64) -> Self {
        Self { length, diameter, roughness }
    }

    fn first_nonpositive(&self) -> Option<(&'static str, f64)> {
        [("length", self.length), ("diameter", self.diameter), ("roughness", self.roughness)]
            .into_iter()
            .find(|&(_, v)| !(v > 0.0 && v.is_finite()))
    }
}

/// Hazen-Williams resistance `10.67 * l * diameter^-4.8704 * roughness^-1.852`.
pub fn resistance(p: &PipeParams) -> f64 {
    HAZEN_WILLIAMS_COEFFICIENT
        * p.length
        * p.diameter.powf(DIAMETER_EXPONENT)
        * p.roughness.powf(-HAZEN_WILLIAMS_EXPONENT)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub role: NodeRole,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pipe {
    pub id: String,
    pub tail: usize,
    pub head: usize,
    pub params: PipeParams,
    pub resistance: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetworkError {
    #[error("network is disconnected: node `{0}` is unreachable from `{1}`")]
    Disconnected(String, String),
    #[error("network has no reservoir node")]
    NoReservoir,
    #[error("network has no consumer node")]
    NoConsumer,
    #[error("pipe `{0}` is a self-loop on node `{1}`")]
    SelfLoop(String, String),
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("pipe `{pipe}` has nonpositive {field} ({value})")]
    NonpositiveParameter { pipe: String, field: &'static str, value: String },
    #[error("pipe `{pipe}` references unknown node `{node}`")]
    UnknownNode { pipe: String, node: String },
}

impl NetworkError {
    /// Stable machine-readable kind, used in reports.
    pub fn kind(&self) -> &'static str {
        match self {
            NetworkError::Disconnected(..) => "disconnected",
            NetworkError::NoReservoir => "no_reservoir",
            NetworkError::NoConsumer => "no_consumer",
            NetworkError::SelfLoop(..) => "self_loop",
            NetworkError::DuplicateId(_) => "duplicate_id",
            NetworkError::NonpositiveParameter { .. } => "nonpositive_parameter",
            NetworkError::UnknownNode { .. } => "unknown_node",
        }
    }
}

/// Pipe entry of a network description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipeSpec {
    pub id: String,
    pub from: String,
    pub to: String,
    pub length_m: f64,
    pub diameter_m: f64,
    pub roughness: f64,
}

/// Unvalidated network description; this is also the JSON file format.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub nodes: Vec<Node>,
    pub pipes: Vec<PipeSpec>,
}

impl NetworkSpec {
    pub fn node(&mut self, id: impl Into<String>, role: NodeRole) -> &mut Self {
        self.nodes.push(Node { id: id.into(), role });
        self
    }

    pub fn pipe(
        &mut self,
        id: impl Into<String>,
        from: impl Into<String>,
        to: impl Into<String>,
        params: PipeParams,
    ) -> &mut Self {
        self.pipes.push(PipeSpec {
            id: id.into(),
            from: from.into(),
            to: to.into(),
            length_m: params.length,
            diameter_m: params.diameter,
            roughness: params.roughness,
        });
        self
    }
}

/// A validated water distribution network.
///
/// Node and pipe order follow insertion order of the [`NetworkSpec`]; every
/// vector indexed by nodes or pipes uses this order. Demands and consumer
/// heads are indexed by position in [`Network::consumers`], reservoir heads
/// by position in [`Network::reservoirs`].
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    nodes: Vec<Node>,
    pipes: Vec<Pipe>,
    node_index: HashMap<String, usize>,
    pipe_index: HashMap<String, usize>,
    reservoirs: Vec<usize>,
    consumers: Vec<usize>,
    // node -> position within reservoirs/consumers
    role_position: Vec<usize>,
}

pub fn build_network(spec: &NetworkSpec) -> Result<Network, NetworkError> {
    let mut node_index = HashMap::with_capacity(spec.nodes.len());
    for (i, node) in spec.nodes.iter().enumerate() {
        if node_index.insert(node.id.clone(), i).is_some() {
            return Err(NetworkError::DuplicateId(node.id.clone()));
        }
    }

    let mut pipe_index = HashMap::with_capacity(spec.pipes.len());
    let mut pipes = Vec::with_capacity(spec.pipes.len());
    for (i, p) in spec.pipes.iter().enumerate() {
        if node_index.contains_key(&p.id) || pipe_index.insert(p.id.clone(), i).is_some() {
            return Err(NetworkError::DuplicateId(p.id.clone()));
        }
        let lookup = |id: &String| {
            node_index.get(id).copied().ok_or_else(|| NetworkError::UnknownNode {
                pipe: p.id.clone(),
                node: id.clone(),
            })
        };
        let tail = lookup(&p.from)?;
        let head = lookup(&p.to)?;
        if tail == head {
            return Err(NetworkError::SelfLoop(p.id.clone(), p.from.clone()));
        }
        let params = PipeParams::new(p.length_m, p.diameter_m, p.roughness);
        if let Some((field, value)) = params.first_nonpositive() {
            return Err(NetworkError::NonpositiveParameter {
                pipe: p.id.clone(),
                field,
                value: value.to_string(),
            });
        }
        pipes.push(Pipe { id: p.id.clone(), tail, head, params, resistance: resistance(&params) });
    }

    let mut reservoirs = Vec::new();
    let mut consumers = Vec::new();
    let mut role_position = Vec::with_capacity(spec.nodes.len());
    for (i, node) in spec.nodes.iter().enumerate() {
        let list = match node.role {
            NodeRole::Reservoir => &mut reservoirs,
            NodeRole::Consumer => &mut consumers,
        };
        role_position.push(list.len());
        list.push(i);
    }
    if reservoirs.is_empty() {
        return Err(NetworkError::NoReservoir);
    }
    if consumers.is_empty() {
        return Err(NetworkError::NoConsumer);
    }

    let mut components = UnionFind::<usize>::new(spec.nodes.len());
    for p in &pipes {
        components.union(p.tail, p.head);
    }
    if let Some(stray) = (1..spec.nodes.len()).find(|&v| !components.equiv(0, v)) {
        return Err(NetworkError::Disconnected(
            spec.nodes[stray].id.clone(),
            spec.nodes[0].id.clone(),
        ));
    }

    Ok(Network {
        nodes: spec.nodes.clone(),
        pipes,
        node_index,
        pipe_index,
        reservoirs,
        consumers,
        role_position,
    })
}

impl Network {
    pub fn from_json(text: &str) -> Result<Self, NetworkFileError> {
        let spec: NetworkSpec = serde_json::from_str(text)?;
        Ok(build_network(&spec)?)
    }

    pub fn to_spec(&self) -> NetworkSpec {
        NetworkSpec {
            nodes: self.nodes.clone(),
            pipes: self
                .pipes
                .iter()
                .map(|p| PipeSpec {
                    id: p.id.clone(),
                    from: self.nodes[p.tail].id.clone(),
                    to: self.nodes[p.head].id.clone(),
                    length_m: p.params.length,
                    diameter_m: p.params.diameter,
                    roughness: p.params.roughness,
                })
                .collect(),
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn pipes(&self) -> &[Pipe] {
        &self.pipes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn pipe_count(&self) -> usize {
        self.pipes.len()
    }

    pub fn reservoir_count(&self) -> usize {
        self.reservoirs.len()
    }

    pub fn consumer_count(&self) -> usize {
        self.consumers.len()
    }

    /// Node indices of reservoirs, in canonical order.
    pub fn reservoirs(&self) -> &[usize] {
        &self.reservoirs
    }

    /// Node indices of consumers, in canonical order.
    pub fn consumers(&self) -> &[usize] {
        &self.consumers
    }

    pub fn role(&self, node: usize) -> NodeRole {
        self.nodes[node].role
    }

    pub fn is_consumer(&self, node: usize) -> bool {
        self.nodes[node].role == NodeRole::Consumer
    }

    /// Position of `node` within [`Network::consumers`], if it is a consumer.
    pub fn consumer_position(&self, node: usize) -> Option<usize> {
        self.is_consumer(node).then(|| self.role_position[node])
    }

    /// Position of `node` within [`Network::reservoirs`], if it is a reservoir.
    pub fn reservoir_position(&self, node: usize) -> Option<usize> {
        (!self.is_consumer(node)).then(|| self.role_position[node])
    }

    pub fn node_by_id(&self, id: &str) -> Option<usize> {
        self.node_index.get(id).copied()
    }

    pub fn pipe_by_id(&self, id: &str) -> Option<usize> {
        self.pipe_index.get(id).copied()
    }

    pub fn resistances(&self) -> Vec<f64> {
        self.pipes.iter().map(|p| p.resistance).collect()
    }

    /// Scatter reservoir heads and consumer heads into a full node vector.
    pub fn assemble_heads(&self, reservoir_heads: &[f64], consumer_heads: &[f64]) -> Vec<f64> {
        let mut heads = vec![0.0; self.node_count()];
        for (&v, &h) in self.reservoirs.iter().zip(reservoir_heads) {
            heads[v] = h;
        }
        for (&v, &h) in self.consumers.iter().zip(consumer_heads) {
            heads[v] = h;
        }
        heads
    }

    pub fn reservoir_heads(&self, heads: &[f64]) -> Vec<f64> {
        self.reservoirs.iter().map(|&v| heads[v]).collect()
    }

    pub fn consumer_heads(&self, heads: &[f64]) -> Vec<f64> {
        self.consumers.iter().map(|&v| heads[v]).collect()
    }
}

#[derive(Debug, Error)]
pub enum NetworkFileError {
    #[error("malformed network JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Invalid(#[from] NetworkError),
}

/// Node-by-pipe incidence matrix with entries in `{-1, 0, 1}`.
///
/// Column `e` carries `+1` on the tail and `-1` on the head of pipe `e`, so
/// `B^T h` is the vector of head differences `h_tail - h_head` and `(B q)_v`
/// is the net outflow of node `v`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<i8>,
    node_ids: Vec<String>,
    pipe_ids: Vec<String>,
}

pub fn incidence_matrix(net: &Network) -> IncidenceMatrix {
    let rows = net.node_count();
    let cols = net.pipe_count();
    let mut entries = vec![0i8; rows * cols];
    for (e, p) in net.pipes().iter().enumerate() {
        entries[p.tail * cols + e] = 1;
        entries[p.head * cols + e] = -1;
    }
    IncidenceMatrix {
        rows,
        cols,
        entries,
        node_ids: net.nodes().iter().map(|n| n.id.clone()).collect(),
        pipe_ids: net.pipes().iter().map(|p| p.id.clone()).collect(),
    }
}

impl IncidenceMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> i8 {
        self.entries[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[i8] {
        &self.entries[row * self.cols..(row + 1) * self.cols]
    }

    pub fn node_id(&self, row: usize) -> &str {
        &self.node_ids[row]
    }

    pub fn pipe_id(&self, col: usize) -> &str {
        &self.pipe_ids[col]
    }

    /// Dense integer submatrix restricted to the given rows and columns.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Vec<Vec<i64>> {
        rows.iter()
            .map(|&r| cols.iter().map(|&c| i64::from(self.get(r, c))).collect())
            .collect()
    }

    /// Rows restricted to a node subset, all columns.
    pub fn restrict_rows(&self, rows: &[usize]) -> Vec<Vec<i64>> {
        let all: Vec<usize> = (0..self.cols).collect();
        self.submatrix(rows, &all)
    }

    pub fn column_sums(&self) -> Vec<i64> {
        (0..self.cols).map(|c| (0..self.rows).map(|r| i64::from(self.get(r, c))).sum()).collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<i64>> {
        let all: Vec<usize> = (0..self.rows).collect();
        self.restrict_rows(&all)
    }
}

impl fmt::Display for IncidenceMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.rows {
            write!(f, "{:>8}", self.node_ids[r])?;
            for v in self.row(r) {
                write!(f, " {v:>2}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

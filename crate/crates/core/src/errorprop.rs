//! Displacement-error propagation through CZ edges and p-basis teleportation
//! hops on an extracted cluster graph.
//!
//! A CZ edge of signed weight w maps Δp_j ← Δp_j + w·Δq_k (and symmetrically),
//! and measuring node m in p hands Δp_m/w to its successor's Δq. Execution is
//! measurement driven: an edge fires when its first endpoint is measured, so
//! a teleported error reaches a node before that node's own edges fire. Edge
//! signs come verbatim from the adjacency extraction; nothing is re-derived
//! here.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::Axis;
use crate::nullifier::ClusterGraph;

#[derive(Debug, Error)]
pub enum ErrorPropError {
    #[error("no edge between {0} and {1}")]
    MissingEdge(String, String),
    #[error("node {0} was already measured")]
    MeasuredReuse(String),
    #[error("teleportation weight of edge to {0} is zero")]
    ZeroWeight(String),
    #[error("successor {0} is not an unmeasured neighbor of {1}")]
    BadSuccessor(String, String),
}

/// Undirected graph with signed real edge weights, keyed by node name.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ErrorGraph {
    edges: BTreeMap<(String, String), f64>,
    nodes: BTreeSet<String>,
}

impl ErrorGraph {
    pub fn new() -> Self {
        Self::default()
    }

    fn key(a: &str, b: &str) -> (String, String) {
        if a <= b {
            (a.to_string(), b.to_string())
        } else {
            (b.to_string(), a.to_string())
        }
    }

    pub fn insert_edge(&mut self, a: &str, b: &str, weight: f64) {
        self.nodes.insert(a.to_string());
        self.nodes.insert(b.to_string());
        self.edges.insert(Self::key(a, b), weight);
    }

    pub fn weight(&self, a: &str, b: &str) -> Option<f64> {
        self.edges.get(&Self::key(a, b)).copied()
    }

    pub fn neighbors(&self, n: &str) -> Vec<(String, f64)> {
        self.edges
            .iter()
            .filter_map(|((a, b), w)| {
                if a == n {
                    Some((b.clone(), *w))
                } else if b == n {
                    Some((a.clone(), *w))
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &String> {
        self.nodes.iter()
    }

    /// Adopt the signed weights of an extracted cluster graph verbatim.
    pub fn from_cluster_graph(graph: &ClusterGraph) -> Self {
        let mut out = Self::new();
        for m in graph.nodes() {
            out.nodes.insert(m.to_string());
        }
        for ((i, j), w) in graph.edges() {
            out.insert_edge(&i.to_string(), &j.to_string(), w.to_f64());
        }
        out
    }
}

/// Per-node displacement record and the measurement bookkeeping. A measured
/// node's record is frozen.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ErrorState {
    dq: BTreeMap<String, f64>,
    dp: BTreeMap<String, f64>,
    measured: BTreeMap<String, Axis>,
}

impl ErrorState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn dq(&self, n: &str) -> f64 {
        self.dq.get(n).copied().unwrap_or(0.0)
    }

    pub fn dp(&self, n: &str) -> f64 {
        self.dp.get(n).copied().unwrap_or(0.0)
    }

    pub fn is_measured(&self, n: &str) -> bool {
        self.measured.contains_key(n)
    }

    pub fn add_dq(&mut self, n: &str, v: f64) {
        *self.dq.entry(n.to_string()).or_insert(0.0) += v;
    }

    pub fn add_dp(&mut self, n: &str, v: f64) {
        *self.dp.entry(n.to_string()).or_insert(0.0) += v;
    }

    pub fn records(&self) -> impl Iterator<Item = (&String, f64, f64)> {
        let keys: BTreeSet<&String> = self.dq.keys().chain(self.dp.keys()).collect();
        keys.into_iter().map(|k| (k, self.dq(k), self.dp(k)))
    }
}

/// CZ error transfer on one edge: Δp gains the partner's Δq scaled by the
/// signed weight; Δq is untouched.
pub fn apply_cz_error(
    state: &mut ErrorState,
    graph: &ErrorGraph,
    j: &str,
    k: &str,
) -> Result<(), ErrorPropError> {
    let w = graph
        .weight(j, k)
        .ok_or_else(|| ErrorPropError::MissingEdge(j.to_string(), k.to_string()))?;
    let (qj, qk) = (state.dq(j), state.dq(k));
    state.add_dp(j, w * qk);
    state.add_dp(k, w * qj);
    Ok(())
}

/// p-basis measurement of `m` teleporting its momentum error onto the
/// successor's position, undoing the edge-weight amplification per hop.
pub fn measure_p_teleport(
    state: &mut ErrorState,
    m: &str,
    successor: &str,
    weight: f64,
) -> Result<(), ErrorPropError> {
    if state.is_measured(m) {
        return Err(ErrorPropError::MeasuredReuse(m.to_string()));
    }
    if state.is_measured(successor) {
        return Err(ErrorPropError::BadSuccessor(
            successor.to_string(),
            m.to_string(),
        ));
    }
    if weight == 0.0 {
        return Err(ErrorPropError::ZeroWeight(successor.to_string()));
    }
    let dp = state.dp(m);
    state.add_dq(successor, dp / weight);
    state.measured.insert(m.to_string(), Axis::P);
    Ok(())
}

/// One scheduled measurement: node, basis, optional teleport target.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlowStep {
    pub node: String,
    pub basis: Axis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub successor: Option<String>,
}

/// Ordered measurement schedule.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct FlowPlan {
    pub steps: Vec<FlowStep>,
}

/// Error injection on one node.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Injection {
    pub node: String,
    pub axis: Axis,
    pub value: f64,
}

/// Execute a plan: per step, the node's not-yet-fired CZ edges transfer
/// errors, then a p-basis step teleports to the successor, then the node
/// freezes. Names the final displacement of every touched node.
pub fn run_cancellation_scenario(
    graph: &ErrorGraph,
    inject: Option<&Injection>,
    plan: &FlowPlan,
) -> Result<ErrorState, ErrorPropError> {
    let mut state = ErrorState::new();
    if let Some(inj) = inject {
        match inj.axis {
            Axis::Q => state.add_dq(&inj.node, inj.value),
            Axis::P => state.add_dp(&inj.node, inj.value),
        }
    }
    let mut fired: BTreeSet<(String, String)> = BTreeSet::new();
    for step in &plan.steps {
        if state.is_measured(&step.node) {
            return Err(ErrorPropError::MeasuredReuse(step.node.clone()));
        }
        for (nbr, _) in graph.neighbors(&step.node) {
            let key = ErrorGraph::key(&step.node, &nbr);
            if state.is_measured(&nbr) || !fired.insert(key) {
                continue;
            }
            apply_cz_error(&mut state, graph, &step.node, &nbr)?;
        }
        match (&step.basis, &step.successor) {
            (Axis::P, Some(s)) => {
                let w = graph
                    .weight(&step.node, s)
                    .ok_or_else(|| ErrorPropError::BadSuccessor(s.clone(), step.node.clone()))?;
                measure_p_teleport(&mut state, &step.node, s, w)?;
            }
            _ => {
                state.measured.insert(step.node.clone(), step.basis);
            }
        }
    }
    Ok(state)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub a: String,
    pub b: String,
    pub weight: f64,
}

/// Scenario file: signed edges (inline, or via a state reference the caller
/// resolves into a graph), one optional injection, the measurement plan,
/// and the nodes expected to end up error-free.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub edges: Vec<EdgeSpec>,
    /// Build parameters of a state whose extracted graph supplies the edges;
    /// same shape as the `spec` header of a state document.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph_ref: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inject: Option<Injection>,
    pub plan: FlowPlan,
    #[serde(default)]
    pub expect_zero: Vec<String>,
}

impl Scenario {
    pub fn graph(&self) -> ErrorGraph {
        let mut g = ErrorGraph::new();
        for e in &self.edges {
            g.insert_edge(&e.a, &e.b, e.weight);
        }
        g
    }

    pub fn run(&self) -> Result<ErrorState, ErrorPropError> {
        self.run_on(&self.graph())
    }

    /// Run against an externally resolved graph (used with `graph_ref`).
    pub fn run_on(&self, graph: &ErrorGraph) -> Result<ErrorState, ErrorPropError> {
        run_cancellation_scenario(graph, self.inject.as_ref(), &self.plan)
    }

    /// True when every expected-zero node ends with exactly zero error.
    pub fn zeros_hold(&self, state: &ErrorState) -> bool {
        self.expect_zero
            .iter()
            .all(|n| state.dq(n) == 0.0 && state.dp(n) == 0.0)
    }
}

/// The bundled six-node cancellation scenario: two three-edge paths of
/// opposite sign meeting at node 4, weights ±1/2, unit q error injected on
/// node 1.
pub fn fig5_scenario() -> Scenario {
    let g = 0.5;
    let edge = |a: &str, b: &str, w: f64| EdgeSpec {
        a: a.into(),
        b: b.into(),
        weight: w,
    };
    let step = |node: &str, successor: Option<&str>| FlowStep {
        node: node.into(),
        basis: Axis::P,
        successor: successor.map(String::from),
    };
    Scenario {
        edges: vec![
            edge("1", "2", g),
            edge("2", "3", g),
            edge("3", "4", g),
            edge("1", "6", -g),
            edge("6", "5", -g),
            edge("5", "4", -g),
        ],
        graph_ref: None,
        inject: Some(Injection {
            node: "1".into(),
            axis: Axis::Q,
            value: 1.0,
        }),
        plan: FlowPlan {
            steps: vec![
                step("1", None),
                step("2", Some("3")),
                step("6", Some("5")),
                step("3", Some("4")),
                step("5", Some("4")),
            ],
        },
        expect_zero: vec!["4".into()],
    }
}

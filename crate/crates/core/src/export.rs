//! Serialization of built states, graphs, reports and error-propagation
//! results. JSON maps are keyed by the canonical mode strings and emitted in
//! sorted order, so identical inputs produce byte-identical documents.

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::algebra::{Axis, ModeId, QuadExpr, Stream};
use crate::builders::{
    build_epr1d, build_hexagonal, build_topological, trim_boundary, BuildError, BuiltState, Gate,
    LatticeSpec, StateKind,
};
use crate::errorprop::ErrorState;
use crate::nullifier::{ClusterGraph, Nullifier, VerifyReport};
use crate::ring::RingError;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error("malformed state document: {0}")]
    BadStateFile(String),
}

pub const SCHEMA_VERSION: u64 = 1;

fn expr_json(expr: &QuadExpr) -> Result<Value, ExportError> {
    let mut terms = Vec::with_capacity(expr.len());
    for (l, c) in expr.iter() {
        let parts = c.dyadic_parts()?;
        terms.push(json!({
            "mode": l.mode.to_string(),
            "axis": l.axis,
            "a_num": parts.a_num,
            "a_exp": parts.a_exp,
            "b_num": parts.b_num,
            "b_exp": parts.b_exp,
        }));
    }
    Ok(Value::Array(terms))
}

fn gate_json(gate: &Gate) -> Value {
    match gate {
        Gate::BeamSplitter { variant, x, y } => json!({
            "type": "beamsplitter",
            "variant": match variant {
                crate::algebra::BsVariant::Bs1 => "bs1",
                crate::algebra::BsVariant::Bs2 => "bs2",
            },
            "x": x.to_string(),
            "y": y.to_string(),
        }),
        Gate::Fourier { mode } => json!({ "type": "fourier", "mode": mode.to_string() }),
        Gate::Delay {
            stream,
            site,
            shift,
        } => json!({
            "type": "delay",
            "stream": stream.to_string(),
            "site": site,
            "shift": shift,
        }),
        Gate::MeasureQ { mode } => json!({ "type": "measure_q", "mode": mode.to_string() }),
        Gate::MeasureP { mode } => json!({ "type": "measure_p", "mode": mode.to_string() }),
    }
}

fn spec_json(state: &BuiltState) -> Value {
    match state.kind {
        StateKind::Epr1d => {
            let slots = state
                .profile
                .modes()
                .filter(|(m, _)| m.stream == Stream::A)
                .count() as u64;
            let r_of = |stream: Stream| {
                state
                    .profile
                    .modes()
                    .find(|(m, _)| m.stream == stream)
                    .map(|(_, s)| s.r)
                    .unwrap_or(0.0)
            };
            json!({
                "state": "epr1d",
                "slots": slots,
                "r_a": r_of(Stream::A),
                "r_b": r_of(Stream::B),
            })
        }
        StateKind::Hexagonal => {
            let (mode, squeeze) = state.profile.modes().next().expect("six sources");
            json!({
                "state": "hexagonal",
                "slot": mode.temporal,
                "stream": mode.stream.to_string(),
                "r": squeeze.r,
            })
        }
        StateKind::Topological => {
            let l = state
                .lattice
                .expect("topological states carry their lattice");
            json!({
                "state": "topological",
                "n": l.n,
                "m": l.m,
                "t": l.t,
                "v": l.v(),
                "r": l.r,
                "trim": !state.trimmed.is_empty(),
            })
        }
    }
}

/// Full state document: build parameters, gate program, live output
/// expansions, and the erased/trimmed mode lists.
pub fn built_state_json(state: &BuiltState) -> Result<Value, ExportError> {
    let mut outputs = Map::new();
    for (mode, (q, p)) in state.live_outputs() {
        outputs.insert(
            mode.to_string(),
            json!({ "q": expr_json(q)?, "p": expr_json(p)? }),
        );
    }
    Ok(json!({
        "schema": SCHEMA_VERSION,
        "spec": spec_json(state),
        "gates": state.program.gates.iter().map(gate_json).collect::<Vec<_>>(),
        "outputs": Value::Object(outputs),
        "erased": state.erased.iter().map(|m| m.to_string()).collect::<Vec<_>>(),
        "trimmed": state.trimmed.iter().map(|m| m.to_string()).collect::<Vec<_>>(),
    }))
}

/// Rebuild a state from the `spec` header of a state document.
pub fn state_from_json(doc: &Value) -> Result<BuiltState, ExportError> {
    let spec = doc
        .get("spec")
        .ok_or_else(|| ExportError::BadStateFile("missing spec".into()))?;
    let field = |name: &str| {
        spec.get(name)
            .ok_or_else(|| ExportError::BadStateFile(format!("missing spec.{name}")))
    };
    let num = |name: &str| -> Result<f64, ExportError> {
        field(name)?
            .as_f64()
            .ok_or_else(|| ExportError::BadStateFile(format!("spec.{name} is not a number")))
    };
    match field("state")?.as_str() {
        Some("epr1d") => Ok(build_epr1d(num("slots")? as u32, num("r_a")?, num("r_b")?)?),
        Some("hexagonal") => {
            let stream = match field("stream")?.as_str() {
                Some("B") => Stream::B,
                _ => Stream::A,
            };
            Ok(build_hexagonal(num("slot")? as u32, num("r")?, stream))
        }
        Some("topological") => {
            let lattice = LatticeSpec::new(
                num("n")? as u32,
                num("m")? as u32,
                num("t")? as u32,
                num("r")?,
            )?;
            let state = build_topological(&lattice)?;
            if spec.get("trim").and_then(Value::as_bool).unwrap_or(false) {
                Ok(trim_boundary(state, &lattice)?)
            } else {
                Ok(state)
            }
        }
        _ => Err(ExportError::BadStateFile("unknown state kind".into())),
    }
}

/// DOT rendering of a cluster graph; edge sign is also expressed as the
/// blue (+) / yellow (−) coloring.
pub fn graph_dot(graph: &ClusterGraph) -> String {
    let mut out = String::from("graph cluster {\n");
    for node in graph.nodes() {
        out.push_str(&format!("  \"{node}\";\n"));
    }
    for ((i, j), w) in graph.edges() {
        let wf = w.to_f64();
        let (sign, color) = if wf >= 0.0 {
            ("+", "blue")
        } else {
            ("-", "yellow")
        };
        out.push_str(&format!(
            "  \"{i}\" -- \"{j}\" [weight={wf}, sign=\"{sign}\", color={color}];\n"
        ));
    }
    out.push_str("}\n");
    out
}

/// CSV of nullifier coefficient vectors: one row per anchor, one column per
/// quadrature in the union of supports.
pub fn nullifier_csv(nulls: &[Nullifier]) -> String {
    use std::collections::BTreeSet;
    let labels: BTreeSet<_> = nulls
        .iter()
        .flat_map(|n| n.expr.labels().copied())
        .collect();
    let mut out = String::from("anchor");
    for l in &labels {
        out.push_str(&format!(",{}[{}]", l.axis, l.mode));
    }
    out.push('\n');
    for n in nulls {
        out.push_str(&n.anchor.to_string());
        for l in &labels {
            out.push_str(&format!(",{}", n.expr.coeff(l).to_f64()));
        }
        out.push('\n');
    }
    out
}

/// Verification report document, optionally with the numeric cross-check
/// section attached.
pub fn verify_report_json(report: &VerifyReport, oracle: Option<&OracleCheck>) -> Value {
    let mut doc = json!({
        "schema": SCHEMA_VERSION,
        "edges": report.edges,
        "global": {
            "all_satisfied": report.all_satisfied,
            "threshold_r": report.threshold_r,
            "threshold_e2r": report.threshold_e2r,
            "threshold_db": report.threshold_db,
        },
    });
    if let Some(check) = oracle {
        doc["oracle"] = json!({
            "max_rel_deviation": check.max_rel_deviation,
            "symplectic_floor": check.symplectic_floor,
            "agreed": check.agreed,
        });
    }
    doc
}

/// Result of cross-checking symbolic variances against the covariance
/// simulation.
#[derive(Clone, Copy, Debug)]
pub struct OracleCheck {
    pub max_rel_deviation: f64,
    pub symplectic_floor: f64,
    pub agreed: bool,
}

/// Error-propagation result document.
pub fn error_state_json(state: &ErrorState, all_expected_zero: bool) -> Value {
    let mut nodes = Map::new();
    for (n, dq, dp) in state.records() {
        nodes.insert(n.clone(), json!({ "dq": dq, "dp": dp }));
    }
    json!({
        "schema": SCHEMA_VERSION,
        "nodes": Value::Object(nodes),
        "all_expected_zero": all_expected_zero,
    })
}

/// Convenience used by tests and the CLI: mode list as display strings.
pub fn mode_strings<'a>(modes: impl Iterator<Item = &'a ModeId>) -> Vec<String> {
    modes.map(|m| m.to_string()).collect()
}

/// Axis tag used in JSON documents.
pub fn axis_tag(axis: Axis) -> &'static str {
    match axis {
        Axis::Q => "q",
        Axis::P => "p",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nullifier::{derive_nullifiers, extract_adjacency, reduce_to_canonical};

    #[test]
    fn empty_graph_renders_an_empty_dot_document() {
        let dot = graph_dot(&ClusterGraph::new());
        assert_eq!(dot, "graph cluster {\n}\n");
    }

    #[test]
    fn hexagonal_dot_has_six_nodes_and_six_edges() {
        let st = build_hexagonal(0, 1.0, Stream::A);
        let canon = reduce_to_canonical(&derive_nullifiers(&st)).unwrap();
        let graph = extract_adjacency(&canon).unwrap();
        let dot = graph_dot(&graph);
        assert_eq!(dot.matches(" -- ").count(), 6);
        assert_eq!(dot.matches(";\n").count(), 12);
        assert!(dot.contains("color=blue"));
        assert!(dot.contains("color=yellow"));
    }

    #[test]
    fn state_document_roundtrips_through_its_spec_header() {
        let st = build_epr1d(3, 0.4, 0.6).unwrap();
        let doc = built_state_json(&st).unwrap();
        assert_eq!(doc["schema"], 1);
        assert_eq!(doc["spec"]["slots"], 3);
        let rebuilt = state_from_json(&doc).unwrap();
        assert_eq!(rebuilt.outputs, st.outputs);
        assert_eq!(rebuilt.erased, st.erased);
    }

    #[test]
    fn built_state_outputs_list_only_live_modes() {
        let st = build_epr1d(2, 0.4, 0.6).unwrap();
        let doc = built_state_json(&st).unwrap();
        let outputs = doc["outputs"].as_object().unwrap();
        assert_eq!(outputs.len(), 2);
        assert!(outputs.contains_key("A:0:1"));
        assert!(outputs.contains_key("B:0:1"));
        assert_eq!(doc["erased"].as_array().unwrap().len(), 2);
    }
}

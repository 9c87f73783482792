//! Nullifier derivation, canonical reduction, adjacency extraction, and the
//! pairwise inseparability checks.
//!
//! A nullifier starts as the squeezed quadrature of one source mode and is
//! transported through the gate program by label substitution: a beam
//! splitter substitutes with its inverse mode-mixing matrix, the quarter
//! rotation substitutes q ← p, p ← −q, and a delay relabels. Transported
//! this way, every nullifier's expansion over source quadratures is exactly
//! its source's squeezed quadrature, so variances are evaluated on the
//! expansion with the squeezing profile.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::algebra::{relabel_delay, Axis, ModeId, QuadExpr, QuadLabel, SqueezeProfile, Stream};
use crate::builders::{BuildError, BuiltState, Gate};
use crate::ring::RingCoeff;

#[derive(Debug, Error)]
pub enum NullifierError {
    #[error("nullifier set is rank deficient (builder bug)")]
    RankDeficient,
    #[error("no canonical form reachable for anchor {0}")]
    NoAnchor(ModeId),
    #[error("nullifier is not in canonical form: {0}")]
    NotCanonical(String),
    #[error("missing squeeze profile entry for {0}")]
    MissingProfile(ModeId),
    #[error("adjacency is not symmetric: {0}")]
    Asymmetric(String),
    #[error("anchors {0} and {1} are not graph-adjacent")]
    NonAdjacent(ModeId, ModeId),
    #[error("cannot erase {0}: a surviving nullifier carries its momentum")]
    ErasedPTerm(ModeId),
    #[error("no squeezing threshold found below r = {0}")]
    NoThreshold(f64),
    #[error(transparent)]
    Build(#[from] BuildError),
}

/// One nullifier: its expression over current window labels, its expansion
/// over source quadratures, and the mode its canonical form anchors on.
#[derive(Clone, Debug, PartialEq)]
pub struct Nullifier {
    pub anchor: ModeId,
    pub expr: QuadExpr,
    pub expansion: QuadExpr,
}

impl Nullifier {
    /// Scale both representations so the first label in canonical order has
    /// unit coefficient; lets forms that differ by an overall scalar compare
    /// exactly.
    pub fn normalized_expr(&self) -> QuadExpr {
        normalize_scale(&self.expr)
    }
}

/// Rescale so the leading (label-ordered) coefficient is one.
pub fn normalize_scale(expr: &QuadExpr) -> QuadExpr {
    match expr.iter().next() {
        None => QuadExpr::zero(),
        Some((_, c)) => {
            let inv = c.try_inverse().expect("leading coefficient is nonzero");
            expr.scale(&inv)
        }
    }
}

/// Two expressions equal up to an overall nonzero scalar.
pub fn equal_up_to_scale(a: &QuadExpr, b: &QuadExpr) -> bool {
    normalize_scale(a) == normalize_scale(b)
}

/// Transport an expression through one gate by label substitution.
pub fn transport_gate(expr: &QuadExpr, gate: &Gate) -> QuadExpr {
    match gate {
        Gate::BeamSplitter { variant, x, y } => {
            let m = variant.inverse_matrix();
            let inv_sqrt2 = RingCoeff::inv_sqrt2();
            expr.substitute(|label| {
                let port = if label.mode == *x {
                    0
                } else if label.mode == *y {
                    1
                } else {
                    return QuadExpr::unit(*label);
                };
                let mut img = QuadExpr::zero();
                let lx = QuadLabel {
                    mode: *x,
                    axis: label.axis,
                };
                let ly = QuadLabel {
                    mode: *y,
                    axis: label.axis,
                };
                img.add_term(lx, RingCoeff::from_int(m[port][0]) * &inv_sqrt2);
                img.add_term(ly, RingCoeff::from_int(m[port][1]) * &inv_sqrt2);
                img
            })
        }
        Gate::Fourier { mode } => expr.substitute(|label| {
            if label.mode != *mode {
                return QuadExpr::unit(*label);
            }
            match label.axis {
                Axis::Q => QuadExpr::unit(QuadLabel::p(*mode)),
                Axis::P => QuadExpr::unit(QuadLabel::q(*mode)).neg(),
            }
        }),
        Gate::Delay {
            stream,
            site,
            shift,
        } => relabel_delay(expr, *stream, *site, *shift),
        Gate::MeasureQ { .. } | Gate::MeasureP { .. } => expr.clone(),
    }
}

/// Transport through a gate sequence in program order.
pub fn transport(expr: &QuadExpr, gates: &[Gate]) -> QuadExpr {
    gates
        .iter()
        .fold(expr.clone(), |e, g| transport_gate(&e, g))
}

/// One nullifier per source mode: the squeezed quadrature transported
/// through the full program.
pub fn derive_nullifiers(state: &BuiltState) -> Vec<Nullifier> {
    let mut out = Vec::with_capacity(state.profile.len());
    for (mode, squeeze) in state.profile.modes() {
        let label = QuadLabel {
            mode: *mode,
            axis: squeeze.axis,
        };
        let source = QuadExpr::unit(label);
        let expr = transport(&source, &state.program.gates);
        out.push(Nullifier {
            anchor: *mode,
            expr,
            expansion: source,
        });
    }
    out
}

fn axis_content(exprs: &[&QuadExpr]) -> (bool, bool) {
    let mut has_q = false;
    let mut has_p = false;
    for e in exprs {
        for (l, _) in e.iter() {
            match l.axis {
                Axis::Q => has_q = true,
                Axis::P => has_p = true,
            }
        }
    }
    (has_q, has_p)
}

/// Canonical reduction. For cluster-type sets (expressions mixing q and p)
/// this is exact Gaussian elimination pivoting on the momentum labels in
/// schedule order, leaving one nullifier per anchor with a unit p-term and
/// only q-terms elsewhere. Sets that split into pure-q and pure-p families
/// (the extended-EPR chain) are reduced family-wise to the graph-local
/// forms: unit coefficient on the anchor, zero on the same-slot partner of
/// the other stream.
pub fn reduce_to_canonical(nulls: &[Nullifier]) -> Result<Vec<Nullifier>, NullifierError> {
    let mixes = nulls.iter().any(|n| {
        let (q, p) = axis_content(&[&n.expr]);
        q && p
    });
    if mixes {
        reduce_cluster(nulls)
    } else {
        reduce_split(nulls)
    }
}

fn reduce_cluster(nulls: &[Nullifier]) -> Result<Vec<Nullifier>, NullifierError> {
    let mut rows: Vec<(QuadExpr, QuadExpr)> = nulls
        .iter()
        .map(|n| (n.expr.clone(), n.expansion.clone()))
        .collect();

    // momentum labels in deterministic schedule order are the pivot targets
    let mut p_labels: Vec<QuadLabel> = rows
        .iter()
        .flat_map(|(e, _)| e.labels().copied())
        .filter(|l| l.axis == Axis::P)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    p_labels.sort_by_key(|l| l.mode.schedule_key());

    let mut pivot_of_row: Vec<Option<ModeId>> = vec![None; rows.len()];
    for label in &p_labels {
        let Some(row_idx) = rows
            .iter()
            .enumerate()
            .position(|(i, (e, _))| pivot_of_row[i].is_none() && !e.coeff(label).is_zero())
        else {
            continue;
        };
        let pivot = rows[row_idx].0.coeff(label);
        let inv = pivot.try_inverse().expect("pivot coefficient is nonzero");
        rows[row_idx].0 = rows[row_idx].0.scale(&inv);
        rows[row_idx].1 = rows[row_idx].1.scale(&inv);
        let (pe, px) = rows[row_idx].clone();
        for (i, (e, x)) in rows.iter_mut().enumerate() {
            if i == row_idx {
                continue;
            }
            let c = e.coeff(label);
            if c.is_zero() {
                continue;
            }
            let neg = -&c;
            *e = e.add_scaled(&neg, &pe);
            *x = x.add_scaled(&neg, &px);
        }
        pivot_of_row[row_idx] = Some(label.mode);
    }

    let mut out = Vec::with_capacity(rows.len());
    for (i, (expr, expansion)) in rows.into_iter().enumerate() {
        let Some(anchor) = pivot_of_row[i] else {
            if expr.is_zero() {
                return Err(NullifierError::RankDeficient);
            }
            return Err(NullifierError::NoAnchor(
                expr.labels().next().map(|l| l.mode).expect("nonzero row"),
            ));
        };
        // canonical shape: exactly one momentum term, on the anchor, unit
        let p_terms: Vec<_> = expr.iter().filter(|(l, _)| l.axis == Axis::P).collect();
        if p_terms.len() != 1 || p_terms[0].0.mode != anchor || !p_terms[0].1.is_one() {
            return Err(NullifierError::NotCanonical(format!(
                "row anchored at {anchor} kept extra momentum terms"
            )));
        }
        out.push(Nullifier {
            anchor,
            expr,
            expansion,
        });
    }
    out.sort_by_key(|n| n.anchor);
    Ok(out)
}

/// Family-wise reduction for the extended-EPR chain: within one axis family,
/// the canonical form for an anchor combines the generators touching its
/// label so the anchor coefficient is one and the same-slot partner's
/// coefficient vanishes.
fn reduce_split(nulls: &[Nullifier]) -> Result<Vec<Nullifier>, NullifierError> {
    let mut out = Vec::new();
    for axis in [Axis::Q, Axis::P] {
        let family: Vec<&Nullifier> = nulls
            .iter()
            .filter(|n| n.expr.labels().all(|l| l.axis == axis) && !n.expr.is_zero())
            .collect();
        if family.is_empty() {
            continue;
        }
        let anchors: BTreeSet<ModeId> = family
            .iter()
            .flat_map(|n| n.expr.labels().map(|l| l.mode))
            .collect();
        for anchor in anchors {
            let anchor_label = QuadLabel { mode: anchor, axis };
            let partner = ModeId::new(
                match anchor.stream {
                    Stream::A => Stream::B,
                    Stream::B => Stream::A,
                },
                anchor.site,
                anchor.temporal,
            );
            let partner_label = QuadLabel {
                mode: partner,
                axis,
            };
            let touching: Vec<&&Nullifier> = family
                .iter()
                .filter(|n| !n.expr.coeff(&anchor_label).is_zero())
                .collect();
            let combo = solve_two_constraints(
                &touching.iter().map(|n| &n.expr).collect::<Vec<_>>(),
                &anchor_label,
                &partner_label,
            )
            .ok_or(NullifierError::NoAnchor(anchor))?;
            let mut expr = QuadExpr::zero();
            let mut expansion = QuadExpr::zero();
            for (n, c) in touching.iter().zip(combo.iter()) {
                expr = expr.add_scaled(c, &n.expr);
                expansion = expansion.add_scaled(c, &n.expansion);
            }
            out.push(Nullifier {
                anchor,
                expr,
                expansion,
            });
        }
    }
    if out.is_empty() {
        return Err(NullifierError::RankDeficient);
    }
    out.sort_by_key(|n| {
        let axis = n.expr.labels().next().map(|l| l.axis).unwrap_or(Axis::Q);
        (n.anchor, axis)
    });
    Ok(out)
}

/// Solve Σ x_g·coeff_g(anchor) = 1, Σ x_g·coeff_g(partner) = 0 for the
/// combination x; free variables are pinned to zero.
fn solve_two_constraints(
    gens: &[&QuadExpr],
    anchor: &QuadLabel,
    partner: &QuadLabel,
) -> Option<Vec<RingCoeff>> {
    let a: Vec<RingCoeff> = gens.iter().map(|g| g.coeff(anchor)).collect();
    let b: Vec<RingCoeff> = gens.iter().map(|g| g.coeff(partner)).collect();
    let n = gens.len();
    let mut x = vec![RingCoeff::zero(); n];
    // pick a column for the partner row first so the anchor row keeps a choice
    let j = (0..n).find(|&j| !b[j].is_zero());
    match j {
        None => {
            // partner constraint is vacuous; satisfy the anchor one alone
            let i = (0..n).find(|&i| !a[i].is_zero())?;
            x[i] = a[i].try_inverse()?;
            Some(x)
        }
        Some(j) => {
            // x_j = −(Σ_{i≠j} x_i b_i)/b_j; substitute into the anchor row
            let i = (0..n).find(|&i| i != j && !(&a[i] - &(&a[j] * &(&b[i] / &b[j]))).is_zero())?;
            let denom = &a[i] - &(&a[j] * &(&b[i] / &b[j]));
            x[i] = denom.try_inverse()?;
            let xj = -&(&x[i] * &(&b[i] / &b[j]));
            x[j] = xj;
            Some(x)
        }
    }
}

/// Apply the quantum erasure to a canonical set: nullifiers anchored on
/// erased modes are consumed; the rest lose their q-terms on erased modes. A
/// surviving momentum term on an erased mode is an error.
pub fn erase(
    nulls: &[Nullifier],
    erased: &BTreeSet<ModeId>,
) -> Result<Vec<Nullifier>, NullifierError> {
    let mut out = Vec::new();
    for n in nulls {
        if erased.contains(&n.anchor) {
            continue;
        }
        let mut expr = QuadExpr::zero();
        for (l, c) in n.expr.iter() {
            if erased.contains(&l.mode) {
                if l.axis == Axis::P {
                    return Err(NullifierError::ErasedPTerm(l.mode));
                }
                continue;
            }
            expr.add_term(*l, c.clone());
        }
        out.push(Nullifier {
            anchor: n.anchor,
            expr,
            expansion: n.expansion.clone(),
        });
    }
    Ok(out)
}

/// Signed weighted adjacency of a cluster state.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ClusterGraph {
    nodes: BTreeSet<ModeId>,
    edges: BTreeMap<(ModeId, ModeId), RingCoeff>,
}

impl ClusterGraph {
    pub fn new() -> Self {
        Self::default()
    }

    fn key(i: ModeId, j: ModeId) -> (ModeId, ModeId) {
        if i <= j {
            (i, j)
        } else {
            (j, i)
        }
    }

    pub fn add_node(&mut self, m: ModeId) {
        self.nodes.insert(m);
    }

    pub fn set_edge(&mut self, i: ModeId, j: ModeId, w: RingCoeff) {
        self.nodes.insert(i);
        self.nodes.insert(j);
        self.edges.insert(Self::key(i, j), w);
    }

    pub fn weight(&self, i: ModeId, j: ModeId) -> Option<&RingCoeff> {
        self.edges.get(&Self::key(i, j))
    }

    pub fn nodes(&self) -> impl Iterator<Item = &ModeId> {
        self.nodes.iter()
    }

    pub fn edges(&self) -> impl Iterator<Item = (&(ModeId, ModeId), &RingCoeff)> {
        self.edges.iter()
    }

    pub fn neighbors(&self, m: ModeId) -> Vec<(ModeId, &RingCoeff)> {
        self.edges
            .iter()
            .filter_map(|((i, j), w)| {
                if *i == m {
                    Some((*j, w))
                } else if *j == m {
                    Some((*i, w))
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Extract the signed weighted adjacency from a canonical set.
///
/// Cluster rows (unit p-anchor, q-terms elsewhere) give C_ij = −(coefficient
/// of q_j in the row anchored at i). A split family gives C from the q-rows
/// by the same formula; p-rows, when present, must reproduce the same weights
/// with opposite sign convention (+coefficient), which doubles as the sign
/// consistency check. Asymmetry is an error.
pub fn extract_adjacency(nulls: &[Nullifier]) -> Result<ClusterGraph, NullifierError> {
    let mut graph = ClusterGraph::new();
    if nulls.is_empty() {
        return Ok(graph);
    }

    let mut directed: BTreeMap<(ModeId, ModeId), RingCoeff> = BTreeMap::new();
    let mut p_rows: Vec<&Nullifier> = Vec::new();

    for n in nulls {
        let (has_q, has_p) = axis_content(&[&n.expr]);
        if has_p && !has_q && n.expr.len() > 1 {
            // pure momentum row of a split family: consistency check later
            p_rows.push(n);
            continue;
        }
        let anchor_axis = if has_p { Axis::P } else { Axis::Q };
        let anchor_label = QuadLabel {
            mode: n.anchor,
            axis: anchor_axis,
        };
        if !n.expr.coeff(&anchor_label).is_one() {
            return Err(NullifierError::NotCanonical(format!(
                "anchor {} lacks a unit {} term",
                n.anchor, anchor_axis
            )));
        }
        graph.add_node(n.anchor);
        for (l, c) in n.expr.iter() {
            if *l == anchor_label {
                continue;
            }
            if l.axis != Axis::Q {
                return Err(NullifierError::NotCanonical(format!(
                    "row anchored at {} has a stray momentum term on {}",
                    n.anchor, l.mode
                )));
            }
            directed.insert((n.anchor, l.mode), -c);
        }
    }

    for ((i, j), w) in &directed {
        match directed.get(&(*j, *i)) {
            Some(back) if back == w => {
                graph.set_edge(*i, *j, w.clone());
            }
            Some(back) => {
                return Err(NullifierError::Asymmetric(format!(
                    "C[{i},{j}] = {w} but C[{j},{i}] = {back}"
                )));
            }
            None => {
                return Err(NullifierError::Asymmetric(format!(
                    "C[{i},{j}] = {w} has no reciprocal entry"
                )));
            }
        }
    }

    // momentum-family rows must agree: weight appears with + sign there
    for n in &p_rows {
        let anchor_label = QuadLabel::p(n.anchor);
        if !n.expr.coeff(&anchor_label).is_one() {
            return Err(NullifierError::NotCanonical(format!(
                "p-row anchored at {} lacks a unit term",
                n.anchor
            )));
        }
        for (l, c) in n.expr.iter() {
            if *l == anchor_label {
                continue;
            }
            let expect = graph.weight(n.anchor, l.mode);
            if expect != Some(c) {
                return Err(NullifierError::Asymmetric(format!(
                    "p-row at {} disagrees with q-row weight toward {}",
                    n.anchor, l.mode
                )));
            }
        }
    }

    Ok(graph)
}

/// Variance of a source-quadrature expression: Σ c²·v with v the profile
/// variance of each (independent) source quadrature.
pub fn variance_of_expr(expr: &QuadExpr, profile: &SqueezeProfile) -> Result<f64, NullifierError> {
    let mut acc = 0.0;
    for (l, c) in expr.iter() {
        let v = profile
            .quad_variance(l)
            .ok_or(NullifierError::MissingProfile(l.mode))?;
        let cf = c.to_f64();
        acc += cf * cf * v;
    }
    Ok(acc)
}

/// Variance of a nullifier under the profile, evaluated on its expansion
/// over source quadratures.
pub fn variance(null: &Nullifier, profile: &SqueezeProfile) -> Result<f64, NullifierError> {
    variance_of_expr(&null.expansion, profile)
}

/// Split Σc² of an expansion into (squeezed-axis, anti-squeezed-axis) parts;
/// the variance at uniform parameter r is then s·e^{−2r}/2 + t·e^{+2r}/2.
pub fn variance_split(
    expr: &QuadExpr,
    profile: &SqueezeProfile,
) -> Result<(f64, f64), NullifierError> {
    let mut squeezed = 0.0;
    let mut anti = 0.0;
    for (l, c) in expr.iter() {
        let sq = profile
            .get(&l.mode)
            .ok_or(NullifierError::MissingProfile(l.mode))?;
        let cf = c.to_f64();
        if sq.axis == l.axis {
            squeezed += cf * cf;
        } else {
            anti += cf * cf;
        }
    }
    Ok((squeezed, anti))
}

/// Outcome of one pairwise inseparability check.
#[derive(Copy, Clone, Debug, Serialize)]
pub struct VlfVerdict {
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

/// Pairwise variance inequality for graph-adjacent anchors:
/// Var(δ_i) + Var(δ_j) < 2ℏ|C_ij| with ℏ = 1.
pub fn vlf_check(
    null_i: &Nullifier,
    null_j: &Nullifier,
    graph: &ClusterGraph,
    profile: &SqueezeProfile,
) -> Result<VlfVerdict, NullifierError> {
    let w = graph
        .weight(null_i.anchor, null_j.anchor)
        .ok_or(NullifierError::NonAdjacent(null_i.anchor, null_j.anchor))?;
    let lhs = variance(null_i, profile)? + variance(null_j, profile)?;
    let rhs = 2.0 * w.to_f64().abs();
    Ok(VlfVerdict {
        lhs,
        rhs,
        satisfied: lhs < rhs,
    })
}

/// Per-edge record of a verification run.
#[derive(Clone, Debug, Serialize)]
pub struct EdgeCheck {
    pub i: String,
    pub j: String,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

/// Full verification report: all pairwise checks plus the minimal uniform
/// squeezing at which every pair passes.
#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub edges: Vec<EdgeCheck>,
    pub all_satisfied: bool,
    pub threshold_r: f64,
    pub threshold_e2r: f64,
    pub threshold_db: f64,
}

const THRESHOLD_EPS: f64 = 1e-9;
const THRESHOLD_R_MAX: f64 = 32.0;

/// Post-erasure canonical rows and their extracted graph: trimmed modes
/// count as erased, and pure-momentum rows consumed by a measurement are
/// dropped rather than erased term-wise.
pub fn post_erasure_graph(
    state: &BuiltState,
    canon: &[Nullifier],
) -> Result<(Vec<Nullifier>, ClusterGraph), NullifierError> {
    let mut gone = state.erased.clone();
    gone.extend(state.trimmed.iter().copied());

    let mut graph_input = Vec::new();
    for n in canon {
        let (has_q, has_p) = axis_content(&[&n.expr]);
        let pure_p = has_p && !has_q && n.expr.len() > 1;
        if pure_p && n.expr.labels().any(|l| gone.contains(&l.mode)) {
            continue;
        }
        graph_input.push(n.clone());
    }
    let survivors = erase(&graph_input, &gone)?;
    let graph = extract_adjacency(&survivors)?;
    Ok((survivors, graph))
}

/// Run the pairwise check on every nearest-neighbor pair of the state's
/// post-erasure graph. Variances are those of the canonical pre-erasure
/// nullifiers, which is where the inequality is sharp; the minimal passing
/// r is found by bisection to 1e−9.
pub fn full_lattice_verify(state: &BuiltState) -> Result<VerifyReport, NullifierError> {
    let derived = derive_nullifiers(state);
    let canon = reduce_to_canonical(&derived)?;
    let (_, graph) = post_erasure_graph(state, &canon)?;

    // variance carriers per anchor: for split families prefer (q-row, p-row)
    // pairing across an edge; cluster states have one row per anchor
    let mut q_like: BTreeMap<ModeId, &Nullifier> = BTreeMap::new();
    let mut p_like: BTreeMap<ModeId, &Nullifier> = BTreeMap::new();
    for n in &canon {
        let (has_q, has_p) = axis_content(&[&n.expr]);
        if has_p && !has_q && n.expr.len() > 1 {
            p_like.insert(n.anchor, n);
        } else {
            q_like.insert(n.anchor, n);
        }
    }

    let mut edges = Vec::new();
    let mut pair_sums: Vec<(f64, f64)> = Vec::new(); // (S_i + S_j, rhs)
    let mut all_satisfied = true;
    for ((i, j), w) in graph.edges() {
        let ni = q_like.get(i).ok_or(NullifierError::NoAnchor(*i))?;
        let nj = p_like
            .get(j)
            .or_else(|| q_like.get(j))
            .ok_or(NullifierError::NoAnchor(*j))?;
        let lhs = variance(ni, &state.profile)? + variance(nj, &state.profile)?;
        let rhs = 2.0 * w.to_f64().abs();
        let satisfied = lhs < rhs;
        all_satisfied &= satisfied;

        let (si, ti) = variance_split(&ni.expansion, &state.profile)?;
        let (sj, tj) = variance_split(&nj.expansion, &state.profile)?;
        debug_assert!(
            ti == 0.0 && tj == 0.0,
            "nullifier with anti-squeezed content"
        );
        pair_sums.push((si + sj, rhs));
        edges.push(EdgeCheck {
            i: i.to_string(),
            j: j.to_string(),
            lhs,
            rhs,
            satisfied,
        });
    }

    let margin = |r: f64| -> f64 {
        let e2r = (-2.0 * r).exp();
        pair_sums
            .iter()
            .map(|(s, rhs)| s * e2r / 2.0 - rhs)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let (threshold_r, threshold_e2r, threshold_db) = if pair_sums.is_empty() || margin(0.0) < 0.0 {
        (0.0, 1.0, 0.0)
    } else if margin(THRESHOLD_R_MAX) > 0.0 {
        return Err(NullifierError::NoThreshold(THRESHOLD_R_MAX));
    } else {
        let (mut lo, mut hi) = (0.0f64, THRESHOLD_R_MAX);
        while hi - lo > THRESHOLD_EPS {
            let mid = 0.5 * (lo + hi);
            if margin(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let r = 0.5 * (lo + hi);
        (r, (-2.0 * r).exp(), crate::algebra::squeeze_db_from_r(r))
    };

    Ok(VerifyReport {
        edges,
        all_satisfied,
        threshold_r,
        threshold_e2r,
        threshold_db,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{BsVariant, Stream};
    use crate::builders::{build_epr1d, build_hexagonal};

    fn a(site: u8, t: u32) -> ModeId {
        ModeId::new(Stream::A, site, t)
    }

    fn b(site: u8, t: u32) -> ModeId {
        ModeId::new(Stream::B, site, t)
    }

    fn expr(terms: &[(ModeId, Axis, i64, u32)]) -> QuadExpr {
        // terms as (mode, axis, num, exp) dyadic coefficients
        let mut e = QuadExpr::zero();
        for (m, axis, num, exp) in terms {
            e.add_term(
                QuadLabel {
                    mode: *m,
                    axis: *axis,
                },
                RingCoeff::dyadic(*num, *exp),
            );
        }
        e
    }

    fn site_mod6(x: i64) -> u8 {
        let r = x.rem_euclid(6);
        if r == 0 {
            6
        } else {
            r as u8
        }
    }

    #[test]
    fn chain_transport_stages() {
        use Axis::{P, Q};
        let bs0 = Gate::BeamSplitter {
            variant: BsVariant::Bs1,
            x: a(0, 0),
            y: b(0, 0),
        };
        let q_source = QuadExpr::unit(QuadLabel::q(a(0, 0)));
        let p_source = QuadExpr::unit(QuadLabel::p(b(0, 0)));

        // after the first coupling: (q_A + q_B)/√2 and (−p_A + p_B)/√2
        let q1 = transport_gate(&q_source, &bs0);
        let p1 = transport_gate(&p_source, &bs0);
        assert!(equal_up_to_scale(
            &q1,
            &expr(&[(a(0, 0), Q, 1, 0), (b(0, 0), Q, 1, 0)])
        ));
        assert!(equal_up_to_scale(
            &p1,
            &expr(&[(a(0, 0), P, -1, 0), (b(0, 0), P, 1, 0)])
        ));

        // after the delay the B label moves one slot up
        let delay = Gate::Delay {
            stream: Stream::B,
            site: 0,
            shift: 1,
        };
        let q2 = transport_gate(&q1, &delay);
        assert!(equal_up_to_scale(
            &q2,
            &expr(&[(a(0, 0), Q, 1, 0), (b(0, 1), Q, 1, 0)])
        ));
    }

    #[test]
    fn chain_nullifiers_reach_the_four_term_form() {
        use Axis::{P, Q};
        let st = build_epr1d(4, 0.5, 0.5).unwrap();
        let derived = derive_nullifiers(&st);
        // interior q-type source at slot 1:
        // q_{A,1} + q_{B,1} − q_{A,2} + q_{B,2} (up to scale)
        let q_row = derived.iter().find(|n| n.anchor == a(0, 1)).unwrap();
        let expect = expr(&[
            (a(0, 1), Q, 1, 0),
            (b(0, 1), Q, 1, 0),
            (a(0, 2), Q, -1, 0),
            (b(0, 2), Q, 1, 0),
        ]);
        assert!(equal_up_to_scale(&q_row.expr, &expect));
        // interior p-type source at slot 1:
        // −p_{A,1} − p_{B,1} − p_{A,2} + p_{B,2}
        let p_row = derived.iter().find(|n| n.anchor == b(0, 1)).unwrap();
        let expect = expr(&[
            (a(0, 1), P, -1, 0),
            (b(0, 1), P, -1, 0),
            (a(0, 2), P, -1, 0),
            (b(0, 2), P, 1, 0),
        ]);
        assert!(equal_up_to_scale(&p_row.expr, &expect));
        // transported nullifiers expand back to their squeezed source
        for n in &derived {
            assert_eq!(st.expand(&n.expr).unwrap(), n.expansion);
        }
    }

    #[test]
    fn chain_canonical_forms_are_graph_local() {
        use Axis::Q;
        let st = build_epr1d(4, 0.5, 0.5).unwrap();
        let canon = reduce_to_canonical(&derive_nullifiers(&st)).unwrap();
        // interior q-type form at (A, 2):
        // q_{A,2} − (q_{A,3} − q_{B,3} + q_{A,1} + q_{B,1})/2
        let row = canon
            .iter()
            .find(|n| n.anchor == a(0, 2) && n.expr.labels().all(|l| l.axis == Q))
            .unwrap();
        let expect = expr(&[
            (a(0, 2), Q, 1, 0),
            (a(0, 3), Q, -1, 1),
            (b(0, 3), Q, 1, 1),
            (a(0, 1), Q, -1, 1),
            (b(0, 1), Q, -1, 1),
        ]);
        assert_eq!(row.expr, expect);
        // its variance is e^{−2r_A}: expansion q⁰_{A,2} − q⁰_{A,1}
        let v = variance(row, &st.profile).unwrap();
        assert!((v - (-2.0f64 * 0.5).exp()).abs() < 1e-14);
    }

    #[test]
    fn chain_adjacency_has_half_weights() {
        let st = build_epr1d(5, 0.5, 0.5).unwrap();
        let canon = reduce_to_canonical(&derive_nullifiers(&st)).unwrap();
        let gone = st.erased.clone();
        let q_rows: Vec<Nullifier> = canon
            .iter()
            .filter(|n| n.expr.labels().all(|l| l.axis == Axis::Q))
            .cloned()
            .collect();
        let survivors = erase(&q_rows, &gone).unwrap();
        let graph = extract_adjacency(&survivors).unwrap();
        let half = RingCoeff::half();
        // interior signs: +1/2 on A–A and toward the earlier slot, −1/2 on
        // the A-to-later-B link
        assert_eq!(graph.weight(a(0, 2), a(0, 3)), Some(&half));
        assert_eq!(graph.weight(a(0, 2), b(0, 3)), Some(&(-&half)));
        assert_eq!(graph.weight(a(0, 2), a(0, 1)), Some(&half));
        assert_eq!(graph.weight(a(0, 2), b(0, 1)), Some(&half));
        assert_eq!(graph.weight(b(0, 2), b(0, 3)), Some(&(-&half)));
        for (_, w) in graph.edges() {
            assert_eq!(w.abs(), half);
        }
    }

    #[test]
    fn hexagonal_transport_stages() {
        use Axis::{P, Q};
        let st = build_hexagonal(0, 1.0, Stream::A);
        let gates = &st.program.gates;
        // rounds: 6 couplings then 3 rotations
        let round1 = &gates[0..3];
        let round2 = &gates[3..6];
        let fouriers = &gates[6..9];

        // p-type source on site 1: p1 → p1 + p6 → p1 − p3 + p4 + p6
        //                           → −q1 + q3 + p4 + p6
        let p1 = QuadExpr::unit(QuadLabel::p(a(1, 0)));
        let s1 = transport(&p1, round1);
        assert!(equal_up_to_scale(
            &s1,
            &expr(&[(a(1, 0), P, 1, 0), (a(6, 0), P, 1, 0)])
        ));
        let s2 = transport(&s1, round2);
        assert!(equal_up_to_scale(
            &s2,
            &expr(&[
                (a(1, 0), P, 1, 0),
                (a(3, 0), P, -1, 0),
                (a(4, 0), P, 1, 0),
                (a(6, 0), P, 1, 0),
            ])
        ));
        let s3 = transport(&s2, fouriers);
        assert!(equal_up_to_scale(
            &s3,
            &expr(&[
                (a(1, 0), Q, -1, 0),
                (a(3, 0), Q, 1, 0),
                (a(4, 0), P, 1, 0),
                (a(6, 0), P, 1, 0),
            ])
        ));

        // q-type source on site 2: q2 → q2 − q3 → q2 − q6 − q3 − q5
        //                           → q2 − q6 − p3 − p5
        let q2 = QuadExpr::unit(QuadLabel::q(a(2, 0)));
        let t1 = transport(&q2, round1);
        assert!(equal_up_to_scale(
            &t1,
            &expr(&[(a(2, 0), Q, 1, 0), (a(3, 0), Q, -1, 0)])
        ));
        let t2 = transport(&t1, round2);
        assert!(equal_up_to_scale(
            &t2,
            &expr(&[
                (a(2, 0), Q, 1, 0),
                (a(6, 0), Q, -1, 0),
                (a(3, 0), Q, -1, 0),
                (a(5, 0), Q, -1, 0),
            ])
        ));
        let t3 = transport(&t2, fouriers);
        assert!(equal_up_to_scale(
            &t3,
            &expr(&[
                (a(2, 0), Q, 1, 0),
                (a(6, 0), Q, -1, 0),
                (a(3, 0), P, -1, 0),
                (a(5, 0), P, -1, 0),
            ])
        ));
    }

    #[test]
    fn hexagonal_canonical_forms() {
        use Axis::{P, Q};
        let st = build_hexagonal(0, 1.0, Stream::A);
        let canon = reduce_to_canonical(&derive_nullifiers(&st)).unwrap();
        assert_eq!(canon.len(), 6);
        for n in 1..=3i64 {
            // odd anchor 2n−1: p + q_{2n} − q_{2n+4}
            let anchor = site_mod6(2 * n - 1);
            let row = canon.iter().find(|x| x.anchor == a(anchor, 0)).unwrap();
            let expect = expr(&[
                (a(anchor, 0), P, 1, 0),
                (a(site_mod6(2 * n), 0), Q, 1, 0),
                (a(site_mod6(2 * n + 4), 0), Q, -1, 0),
            ]);
            assert_eq!(row.expr, expect, "odd anchor {anchor}");
            // even anchor 2n: p − q_{2n+1} + q_{2n+5}
            let anchor = site_mod6(2 * n);
            let row = canon.iter().find(|x| x.anchor == a(anchor, 0)).unwrap();
            let expect = expr(&[
                (a(anchor, 0), P, 1, 0),
                (a(site_mod6(2 * n + 1), 0), Q, -1, 0),
                (a(site_mod6(2 * n + 5), 0), Q, 1, 0),
            ]);
            assert_eq!(row.expr, expect, "even anchor {anchor}");
        }
        // reduction of an already-canonical set is the identity
        let again = reduce_to_canonical(&canon).unwrap();
        assert_eq!(again, canon);
        // variances: norm² = 3 over squeezed sources → (3/2)e^{−2r}
        for n in &canon {
            let v = variance(n, &st.profile).unwrap();
            let expect = 1.5 * (-2.0f64).exp();
            assert!((v - expect).abs() / expect < 1e-12);
        }
    }

    #[test]
    fn hexagonal_graph_and_pairwise_checks() {
        let st = build_hexagonal(0, 1.0, Stream::A);
        let canon = reduce_to_canonical(&derive_nullifiers(&st)).unwrap();
        let graph = extract_adjacency(&canon).unwrap();
        assert_eq!(graph.node_count(), 6);
        assert_eq!(graph.edge_count(), 6);

        let one = RingCoeff::one();
        assert_eq!(graph.weight(a(1, 0), a(2, 0)), Some(&(-&one)));
        assert_eq!(graph.weight(a(2, 0), a(3, 0)), Some(&one));

        let n1 = canon.iter().find(|n| n.anchor == a(1, 0)).unwrap();
        let n2 = canon.iter().find(|n| n.anchor == a(2, 0)).unwrap();
        let verdict = vlf_check(n1, n2, &graph, &st.profile).unwrap();
        // lhs = 3e^{−2} ≈ 0.406, rhs = 2|C| = 2
        assert!((verdict.lhs - 3.0 * (-2.0f64).exp()).abs() < 1e-12);
        assert!((verdict.rhs - 2.0).abs() < 1e-15);
        assert!(verdict.satisfied);

        // non-adjacent anchors are rejected: sites 1 and 4 share no edge
        let n4 = canon.iter().find(|n| n.anchor == a(4, 0)).unwrap();
        assert!(matches!(
            vlf_check(n1, n4, &graph, &st.profile),
            Err(NullifierError::NonAdjacent(_, _))
        ));
    }

    #[test]
    fn empty_set_gives_empty_graph() {
        let graph = extract_adjacency(&[]).unwrap();
        assert!(graph.is_empty());
        assert_eq!(graph.edge_count(), 0);
    }

    #[test]
    fn reduction_rejects_dependent_and_anchorless_sets() {
        let null = Nullifier {
            anchor: a(1, 0),
            expr: QuadExpr::unit(QuadLabel::p(a(1, 0)))
                .add(&QuadExpr::unit(QuadLabel::q(a(2, 0)))),
            expansion: QuadExpr::unit(QuadLabel::p(a(1, 0))),
        };
        let dup = [null.clone(), null.clone()];
        assert!(matches!(
            reduce_to_canonical(&dup),
            Err(NullifierError::RankDeficient)
        ));

        // a row with no momentum support cannot be anchored
        let stray = Nullifier {
            anchor: a(3, 0),
            expr: QuadExpr::unit(QuadLabel::q(a(3, 0))),
            expansion: QuadExpr::unit(QuadLabel::q(a(3, 0))),
        };
        assert!(matches!(
            reduce_to_canonical(&[null, stray]),
            Err(NullifierError::NoAnchor(_))
        ));
    }

    #[test]
    fn erasure_rejects_momentum_on_a_measured_mode() {
        let survivor = Nullifier {
            anchor: a(1, 0),
            expr: QuadExpr::unit(QuadLabel::p(a(1, 0)))
                .add(&QuadExpr::unit(QuadLabel::p(a(2, 0)))),
            expansion: QuadExpr::zero(),
        };
        let gone = BTreeSet::from([a(2, 0)]);
        assert!(matches!(
            erase(&[survivor], &gone),
            Err(NullifierError::ErasedPTerm(_))
        ));
    }

    #[test]
    fn adjacency_extraction_rejects_asymmetric_weights() {
        let row = |anchor: ModeId, other: ModeId, w: RingCoeff| Nullifier {
            anchor,
            expr: QuadExpr::unit(QuadLabel::p(anchor))
                .add(&QuadExpr::term(QuadLabel::q(other), w)),
            expansion: QuadExpr::zero(),
        };
        let nulls = [
            row(a(1, 0), a(2, 0), RingCoeff::half()),
            row(a(2, 0), a(1, 0), -RingCoeff::half()),
        ];
        assert!(matches!(
            extract_adjacency(&nulls),
            Err(NullifierError::Asymmetric(_))
        ));
        // a one-sided entry is just as bad
        let lone = [row(a(1, 0), a(2, 0), RingCoeff::half())];
        assert!(matches!(
            extract_adjacency(&lone),
            Err(NullifierError::Asymmetric(_))
        ));
    }

    #[test]
    fn vacuum_variance_of_unit_norm_vector_is_half() {
        let m = a(0, 0);
        let mut profile = SqueezeProfile::new();
        profile.insert(m, Axis::Q, 0.0);
        let n = Nullifier {
            anchor: m,
            expr: QuadExpr::unit(QuadLabel::q(m)),
            expansion: QuadExpr::unit(QuadLabel::q(m)),
        };
        assert_eq!(variance(&n, &profile).unwrap(), 0.5);
    }

    #[test]
    fn chain_verify_threshold_is_half_e2r() {
        // threshold variance 1/2 per nullifier, i.e. −3.01 dB
        let st = build_epr1d(6, 0.5, 0.5).unwrap();
        let report = full_lattice_verify(&st).unwrap();
        assert!((report.threshold_e2r - 0.5).abs() < 1e-8);
        assert!((report.threshold_db - (-3.0103)).abs() < 0.01);
        // r = 0.5 means e^{−2r} ≈ 0.368 < 1/2: satisfied
        assert!(report.all_satisfied);
        let st0 = build_epr1d(6, 0.2, 0.2).unwrap();
        let report0 = full_lattice_verify(&st0).unwrap();
        // e^{−0.4} ≈ 0.67 > 1/2: not satisfied
        assert!(!report0.all_satisfied);
    }

    #[test]
    fn hexagonal_verify_threshold_is_two_thirds() {
        let st = build_hexagonal(0, 1.0, Stream::A);
        let report = full_lattice_verify(&st).unwrap();
        // lhs = 3e^{−2r}, rhs = 2 → threshold e^{−2r} = 2/3
        assert!((report.threshold_e2r - 2.0 / 3.0).abs() < 1e-8);
        assert!(report.all_satisfied);
    }
}

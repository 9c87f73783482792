//! Verification-path checks that cut across modules: the lattice pairwise
//! inequality at specific squeezing values, variance monotonicity, and the
//! degenerate small-window behavior.

use cvcluster::algebra::{Axis, ModeId, QuadExpr, QuadLabel, SqueezeProfile, Stream};
use cvcluster::builders::{build_epr1d, build_hexagonal, build_topological, LatticeSpec};
use cvcluster::nullifier::{
    derive_nullifiers, extract_adjacency, full_lattice_verify, post_erasure_graph,
    reduce_to_canonical, variance, vlf_check, Nullifier,
};
use cvcluster::ring::RingCoeff;

#[test]
fn lattice_pair_check_at_unit_and_zero_squeezing() {
    let spec = LatticeSpec::new(2, 2, 2, 1.0).unwrap();
    let state = build_topological(&spec).unwrap();
    let canon = reduce_to_canonical(&derive_nullifiers(&state)).unwrap();
    let (_, graph) = post_erasure_graph(&state, &canon).unwrap();

    let slot = spec.site_delay(4);
    let i = canon
        .iter()
        .find(|n| n.anchor == ModeId::new(Stream::A, 1, slot))
        .unwrap();
    let j = canon
        .iter()
        .find(|n| n.anchor == ModeId::new(Stream::A, 2, slot))
        .unwrap();

    // r = 1: lhs = 3e^{−2} ≈ 0.406 < 1 = 2|C|
    let verdict = vlf_check(i, j, &graph, &state.profile).unwrap();
    assert!((verdict.lhs - 3.0 * (-2.0f64).exp()).abs() < 1e-12);
    assert!((verdict.rhs - 1.0).abs() < 1e-15);
    assert!(verdict.satisfied);

    // r = 0: lhs = 3 ≥ 1, the vacuum is separable-compatible
    let vacuum = state.profile.with_uniform_r(0.0);
    let verdict = vlf_check(i, j, &graph, &vacuum).unwrap();
    assert!((verdict.lhs - 3.0).abs() < 1e-12);
    assert!(!verdict.satisfied);
}

#[test]
fn nullifier_variances_fall_monotonically_with_squeezing() {
    let states = [
        build_epr1d(4, 0.5, 0.5).unwrap(),
        build_hexagonal(0, 0.5, Stream::A),
        build_topological(&LatticeSpec::new(2, 2, 1, 0.5).unwrap()).unwrap(),
    ];
    for state in &states {
        for null in derive_nullifiers(state) {
            let mut last = f64::INFINITY;
            for r in [0.0, 1.0, 2.0, 4.0] {
                let v = variance(&null, &state.profile.with_uniform_r(r)).unwrap();
                assert!(v < last, "variance not decreasing at r={r}");
                last = v;
            }
            assert!(last < 2e-4, "variance did not tend to zero: {last}");
        }
    }
}

#[test]
fn unsqueezed_chain_nullifiers_sit_at_the_vacuum_variance() {
    let state = build_epr1d(3, 0.0, 0.0).unwrap();
    for null in derive_nullifiers(&state) {
        let v = variance(&null, &state.profile).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
    }
}

#[test]
fn two_slot_window_degenerates_to_an_edgeless_report() {
    // after erasing the two scheduling orphans only an uncoupled pair of
    // nodes remains; the report is vacuous and the threshold trivial
    let state = build_epr1d(2, 0.5, 0.5).unwrap();
    let report = full_lattice_verify(&state).unwrap();
    assert!(report.edges.is_empty());
    assert!(report.all_satisfied);
    assert_eq!(report.threshold_db, 0.0);
}

#[test]
fn asymmetric_lattice_keeps_the_forms_and_threshold() {
    // N ≠ M so a swapped dimension shows up in the delays and the reduced
    // rows: V = 6, site delays (0, 1, 4, 10, 9, 6). Two layers, since the
    // site-4 coupling starts at slot N+V+1 = 10 and the full site-3 form
    // needs both that neighbor and its +V partner inside the window.
    let spec = LatticeSpec::new(3, 2, 2, 0.5).unwrap();
    assert_eq!(spec.site_delay(3), 4);
    assert_eq!(spec.site_delay(5), 9);
    let state = build_topological(&spec).unwrap();
    let canon = reduce_to_canonical(&derive_nullifiers(&state)).unwrap();

    let a = |site: u8, t: u32| ModeId::new(Stream::A, site, t);
    let b = |site: u8, t: u32| ModeId::new(Stream::B, site, t);
    let half = RingCoeff::half();
    let row_of = |anchor: ModeId| canon.iter().find(|n| n.anchor == anchor).unwrap();

    // site-3 anchor at slot 10: earlier-neighbor shift is N, later is V
    let k = 10u32;
    let mut expect = QuadExpr::unit(QuadLabel::p(a(3, k)));
    for (mode, sign) in [
        (a(2, k), -1i64),
        (b(2, k), -1),
        (a(2, k - 3), -1),
        (b(2, k - 3), 1),
        (a(4, k), 1),
        (b(4, k), 1),
        (a(4, k + 6), 1),
        (b(4, k + 6), -1),
    ] {
        expect.add_term(QuadLabel::q(mode), RingCoeff::from_int(sign) * &half);
    }
    assert_eq!(row_of(a(3, k)).expr, expect);

    // site-5 anchor at slot 10: shifts +1 and −N
    let mut expect = QuadExpr::unit(QuadLabel::p(a(5, k)));
    for (mode, sign) in [
        (a(4, k), -1i64),
        (b(4, k), -1),
        (a(4, k + 1), -1),
        (b(4, k + 1), 1),
        (a(6, k), 1),
        (b(6, k), 1),
        (a(6, k - 3), 1),
        (b(6, k - 3), -1),
    ] {
        expect.add_term(QuadLabel::q(mode), RingCoeff::from_int(sign) * &half);
    }
    assert_eq!(row_of(a(5, k)).expr, expect);

    // variances, edge weights and the threshold are unchanged
    let live: Vec<ModeId> = state.live_modes();
    for anchor in &live {
        let v = variance(row_of(*anchor), &state.profile).unwrap();
        let e = 1.5 * (-1.0f64).exp();
        assert!((v - e).abs() / e < 1e-12);
    }
    let (_, graph) = post_erasure_graph(&state, &canon).unwrap();
    for (_, w) in graph.edges() {
        assert_eq!(w.abs(), half);
    }
    let report = full_lattice_verify(&state).unwrap();
    assert!((report.threshold_e2r - 1.0 / 3.0).abs() < 1e-8);
}

#[test]
fn single_edge_graph_degenerates_to_one_pair_check() {
    // two-node cluster: δ_a = p_a − w·q_b, δ_b = p_b − w·q_a, each expanding
    // to one squeezed source quadrature
    let a = ModeId::new(Stream::A, 0, 0);
    let b = ModeId::new(Stream::B, 0, 0);
    let src_a = ModeId::new(Stream::A, 0, 1);
    let src_b = ModeId::new(Stream::B, 0, 1);
    let w = RingCoeff::half();
    let row = |anchor: ModeId, other: ModeId, source: ModeId| {
        let mut expr = QuadExpr::unit(QuadLabel::p(anchor));
        expr.add_term(QuadLabel::q(other), -&w);
        Nullifier {
            anchor,
            expr,
            expansion: QuadExpr::unit(QuadLabel::p(source)),
        }
    };
    let nulls = [row(a, b, src_a), row(b, a, src_b)];
    let graph = extract_adjacency(&nulls).unwrap();
    assert_eq!(graph.node_count(), 2);
    assert_eq!(graph.edge_count(), 1);

    let mut profile = SqueezeProfile::new();
    profile.insert(src_a, Axis::P, 2.0);
    profile.insert(src_b, Axis::P, 2.0);
    let verdict = vlf_check(&nulls[0], &nulls[1], &graph, &profile).unwrap();
    assert!((verdict.rhs - 1.0).abs() < 1e-15);
    let expect = (-4.0f64).exp();
    assert!((verdict.lhs - expect).abs() < 1e-12);
    assert!(verdict.satisfied);
}

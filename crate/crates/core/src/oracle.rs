//! Numeric verification path: covariance-matrix simulation of the same gate
//! programs, with homodyne q-measurement implemented as the Gaussian
//! conditional (Schur-complement) update.
//!
//! Quadratures are ordered q₁,p₁,…,q_n,p_n. Means are tracked but stay zero:
//! the feed-forward after each measurement is ideal. This module never
//! consults the symbolic expansions; agreement between the two routes is an
//! end-to-end check.

use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix, DVector};
use thiserror::Error;

use crate::algebra::{Axis, ModeId, QuadExpr, SqueezeProfile};
use crate::builders::Gate;
use crate::ring::RingCoeff;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("mode {0} is not present in the covariance state")]
    UnknownMode(ModeId),
    #[error("expression references dropped mode {0}")]
    DroppedMode(ModeId),
    #[error("measured quadrature of {0} has (near-)zero variance")]
    SingularMeasurement(ModeId),
    #[error("covariance failed the physicality check: min symplectic eigenvalue {0}")]
    Unphysical(f64),
}

/// Gaussian state over a finite window of modes: covariance matrix plus a
/// (zero) mean vector.
#[derive(Clone, Debug)]
pub struct CovarianceState {
    order: Vec<ModeId>,
    index: BTreeMap<ModeId, usize>,
    v: DMatrix<f64>,
    mean: DVector<f64>,
}

fn omega_mul(m: &DMatrix<f64>) -> DMatrix<f64> {
    // Ω·M in qpqp ordering: row q_i picks +row p_i, row p_i picks −row q_i
    let n = m.nrows();
    let mut out = DMatrix::zeros(n, m.ncols());
    for i in (0..n).step_by(2) {
        out.set_row(i, &m.row(i + 1));
        out.set_row(i + 1, &(-m.row(i)));
    }
    out
}

impl CovarianceState {
    /// Block-diagonal squeezed-vacuum covariance for the profile's modes.
    pub fn init_covariance(profile: &SqueezeProfile) -> Self {
        let order: Vec<ModeId> = profile.modes().map(|(m, _)| *m).collect();
        let index = order.iter().enumerate().map(|(i, m)| (*m, i)).collect();
        let n = order.len();
        let mut v = DMatrix::zeros(2 * n, 2 * n);
        for (i, mode) in order.iter().enumerate() {
            let s = profile.get(mode).expect("profile lists its own modes");
            let (vq, vp) = match s.axis {
                Axis::Q => ((-2.0 * s.r).exp() / 2.0, (2.0 * s.r).exp() / 2.0),
                Axis::P => ((2.0 * s.r).exp() / 2.0, (-2.0 * s.r).exp() / 2.0),
            };
            v[(2 * i, 2 * i)] = vq;
            v[(2 * i + 1, 2 * i + 1)] = vp;
        }
        let mean = DVector::zeros(2 * n);
        Self {
            order,
            index,
            v,
            mean,
        }
    }

    pub fn mode_count(&self) -> usize {
        self.order.len()
    }

    pub fn modes(&self) -> &[ModeId] {
        &self.order
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    fn quad_index(&self, mode: &ModeId, axis: Axis) -> Option<usize> {
        self.index
            .get(mode)
            .map(|i| 2 * i + usize::from(axis == Axis::P))
    }

    fn mix_rows_cols(&mut self, i: usize, j: usize, m: [[i64; 2]; 2]) {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let (m00, m01) = (m[0][0] as f64 * s, m[0][1] as f64 * s);
        let (m10, m11) = (m[1][0] as f64 * s, m[1][1] as f64 * s);
        let n = self.v.nrows();
        for c in 0..n {
            let (a, b) = (self.v[(i, c)], self.v[(j, c)]);
            self.v[(i, c)] = m00 * a + m01 * b;
            self.v[(j, c)] = m10 * a + m11 * b;
        }
        for r in 0..n {
            let (a, b) = (self.v[(r, i)], self.v[(r, j)]);
            self.v[(r, i)] = m00 * a + m01 * b;
            self.v[(r, j)] = m10 * a + m11 * b;
        }
    }

    /// V ← S V Sᵀ for one gate's symplectic block; delays permute labels.
    /// Measurement records apply the homodyne erasure.
    pub fn apply_gate(&mut self, gate: &Gate) -> Result<(), OracleError> {
        match gate {
            Gate::BeamSplitter { variant, x, y } => {
                let qx = self
                    .quad_index(x, Axis::Q)
                    .ok_or(OracleError::UnknownMode(*x))?;
                let qy = self
                    .quad_index(y, Axis::Q)
                    .ok_or(OracleError::UnknownMode(*y))?;
                let m = variant.matrix();
                self.mix_rows_cols(qx, qy, m);
                self.mix_rows_cols(qx + 1, qy + 1, m);
            }
            Gate::Fourier { mode } => {
                // output convention (q, p) ↦ (−p, q)
                let q = self
                    .quad_index(mode, Axis::Q)
                    .ok_or(OracleError::UnknownMode(*mode))?;
                let p = q + 1;
                let n = self.v.nrows();
                for c in 0..n {
                    let (a, b) = (self.v[(q, c)], self.v[(p, c)]);
                    self.v[(q, c)] = -b;
                    self.v[(p, c)] = a;
                }
                for r in 0..n {
                    let (a, b) = (self.v[(r, q)], self.v[(r, p)]);
                    self.v[(r, q)] = -b;
                    self.v[(r, p)] = a;
                }
            }
            Gate::Delay {
                stream,
                site,
                shift,
            } => {
                if *shift == 0 {
                    return Ok(());
                }
                for m in self.order.iter_mut() {
                    if m.stream == *stream && m.site == *site {
                        m.temporal += shift;
                    }
                }
                self.index = self
                    .order
                    .iter()
                    .enumerate()
                    .map(|(i, m)| (*m, i))
                    .collect();
            }
            Gate::MeasureQ { mode } => self.homodyne_erase(mode, Axis::Q)?,
            Gate::MeasureP { mode } => self.homodyne_erase(mode, Axis::P)?,
        }
        Ok(())
    }

    /// Replay a program; measurement records are skipped unless
    /// `with_erasure` is set.
    pub fn replay(&mut self, gates: &[Gate], with_erasure: bool) -> Result<(), OracleError> {
        for g in gates {
            if !with_erasure && matches!(g, Gate::MeasureQ { .. } | Gate::MeasureP { .. }) {
                continue;
            }
            self.apply_gate(g)?;
        }
        Ok(())
    }

    /// Homodyne q-measurement of one mode with ideal feed-forward: Schur
    /// complement on the measured quadrature, then the mode is dropped. The
    /// conditional covariance is outcome independent; means stay zero.
    pub fn homodyne_erase_q(&mut self, mode: &ModeId) -> Result<(), OracleError> {
        self.homodyne_erase(mode, Axis::Q)
    }

    fn homodyne_erase(&mut self, mode: &ModeId, axis: Axis) -> Result<(), OracleError> {
        let k = self
            .quad_index(mode, axis)
            .ok_or(OracleError::UnknownMode(*mode))?;
        let var = self.v[(k, k)];
        // rank-1 measured subspace: pseudo-inversion is 1/var above the
        // degeneracy cutoff
        let scale = self.v.diagonal().max();
        if var <= scale * 1e-12 {
            return Err(OracleError::SingularMeasurement(*mode));
        }
        let col = self.v.column(k).clone_owned();
        self.v -= &col * col.transpose() / var;

        let mode_pos = self.index[mode];
        let keep: Vec<usize> = (0..self.v.nrows()).filter(|r| r / 2 != mode_pos).collect();
        let mut next = DMatrix::zeros(keep.len(), keep.len());
        for (a, &ra) in keep.iter().enumerate() {
            for (b, &rb) in keep.iter().enumerate() {
                next[(a, b)] = self.v[(ra, rb)];
            }
        }
        self.v = next;
        self.order.remove(mode_pos);
        self.index = self
            .order
            .iter()
            .enumerate()
            .map(|(i, m)| (*m, i))
            .collect();
        self.mean = DVector::zeros(2 * self.order.len());
        Ok(())
    }

    /// vᵀ V v for an expression over the state's current mode labels.
    pub fn quadratic_form_variance(&self, expr: &QuadExpr) -> Result<f64, OracleError> {
        let mut terms: Vec<(usize, f64)> = Vec::with_capacity(expr.len());
        for (l, c) in expr.iter() {
            let k = self
                .quad_index(&l.mode, l.axis)
                .ok_or(OracleError::DroppedMode(l.mode))?;
            terms.push((k, c.to_f64()));
        }
        let mut acc = 0.0;
        for (i, ci) in &terms {
            for (j, cj) in &terms {
                acc += ci * cj * self.v[(*i, *j)];
            }
        }
        Ok(acc)
    }

    /// Lower bound on the minimal symplectic eigenvalue. Pure states (every
    /// state this module produces) take a fast certificate; otherwise the
    /// spectrum is computed outright.
    pub fn symplectic_floor(&self) -> f64 {
        let n = self.v.nrows();
        if n == 0 {
            return f64::INFINITY;
        }
        // purity certificate: (2ΩV)² = −I exactly on a pure state
        let a = omega_mul(&self.v) * 2.0;
        let mut m = &a * &a;
        for i in 0..n {
            m[(i, i)] += 1.0;
        }
        let norm = m
            .row_iter()
            .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        if norm < 1e-8 {
            return 0.5 * (1.0 - norm).max(0.0).sqrt();
        }
        let Some(ch) = Cholesky::new(self.v.clone()) else {
            return f64::NEG_INFINITY;
        };
        let l = ch.l();
        let w = l.transpose() * omega_mul(&l);
        let minus_w2 = -(&w * &w);
        let sym = (&minus_w2 + minus_w2.transpose()) * 0.5;
        sym.symmetric_eigenvalues()
            .iter()
            .map(|e| e.max(0.0).sqrt())
            .fold(f64::INFINITY, f64::min)
    }

    /// Uncertainty-principle check: min symplectic eigenvalue ≥ 1/2 − tol.
    pub fn assert_physical(&self, tol: f64) -> Result<(), OracleError> {
        let floor = self.symplectic_floor();
        if floor >= 0.5 - tol {
            Ok(())
        } else {
            Err(OracleError::Unphysical(floor))
        }
    }

    /// Row-major CSV dump with a header naming the quadrature columns.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = self
            .order
            .iter()
            .flat_map(|m| [format!("q[{m}]"), format!("p[{m}]")])
            .collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for r in 0..self.v.nrows() {
            let row: Vec<String> = (0..self.v.ncols())
                .map(|c| self.v[(r, c)].to_string())
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Weighted inner product Σ aᵢbᵢvᵢ of two source-quadrature expressions,
/// with v the profile variances; the covariance of two zero-mean linear
/// forms over independent squeezed sources.
pub fn weighted_inner(x: &QuadExpr, y: &QuadExpr, profile: &SqueezeProfile) -> Option<f64> {
    let mut acc = 0.0;
    for (l, c) in x.iter() {
        let other = y.coeff(l);
        if other.is_zero() {
            continue;
        }
        acc += c.to_f64() * other.to_f64() * profile.quad_variance(l)?;
    }
    Some(acc)
}

/// Conditional variance of a window-label expression given exact homodyne
/// q-measurements of `measured`, computed symbolically: expansions over the
/// sources plus one Gaussian conditioning step. Independent of the gate
/// replay above.
pub fn conditional_variance(
    state: &crate::builders::BuiltState,
    expr: &QuadExpr,
    measured: &[ModeId],
) -> Result<f64, OracleError> {
    let expand = |e: &QuadExpr| -> Result<QuadExpr, OracleError> {
        state.expand(e).map_err(|err| match err {
            crate::builders::BuildError::UnknownMode(m) => OracleError::UnknownMode(m),
            _ => unreachable!("expansion only fails on unknown modes"),
        })
    };
    let x = expand(expr)?;
    let profile = &state.profile;
    let var_x = weighted_inner(&x, &x, profile)
        .ok_or_else(|| OracleError::UnknownMode(x.labels().next().expect("nonzero").mode))?;
    if measured.is_empty() {
        return Ok(var_x);
    }
    let u: Vec<QuadExpr> = measured
        .iter()
        .map(|m| {
            expand(&QuadExpr::term(
                crate::algebra::QuadLabel::q(*m),
                RingCoeff::one(),
            ))
        })
        .collect::<Result<_, _>>()?;
    let k = u.len();
    let mut g = DMatrix::zeros(k, k);
    let mut c = DVector::zeros(k);
    for i in 0..k {
        c[i] = weighted_inner(&x, &u[i], profile).unwrap_or(0.0);
        for j in i..k {
            let w = weighted_inner(&u[i], &u[j], profile).unwrap_or(0.0);
            g[(i, j)] = w;
            g[(j, i)] = w;
        }
    }
    let ch = Cholesky::new(g).ok_or(OracleError::SingularMeasurement(measured[0]))?;
    let sol = ch.solve(&c);
    Ok(var_x - c.dot(&sol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{BsVariant, QuadLabel, Stream};
    use crate::builders::build_hexagonal;

    fn mode(stream: Stream, site: u8, t: u32) -> ModeId {
        ModeId::new(stream, site, t)
    }

    fn vacuum_profile(n: u32) -> SqueezeProfile {
        let mut p = SqueezeProfile::new();
        for k in 0..n {
            p.insert(mode(Stream::A, 0, k), Axis::Q, 0.0);
        }
        p
    }

    #[test]
    fn vacuum_is_half_identity() {
        let st = CovarianceState::init_covariance(&vacuum_profile(3));
        assert_eq!(st.matrix(), &(DMatrix::identity(6, 6) * 0.5));
        assert!(st.mean().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn squeezed_diagonal_and_purity() {
        let mut p = SqueezeProfile::new();
        p.insert(mode(Stream::A, 0, 0), Axis::Q, 1.0);
        let st = CovarianceState::init_covariance(&p);
        let vq = st.matrix()[(0, 0)];
        let vp = st.matrix()[(1, 1)];
        assert!((vq - (-2.0f64).exp() / 2.0).abs() < 1e-15);
        assert!((vp - (2.0f64).exp() / 2.0).abs() < 1e-15);
        assert!((vq * vp - 0.25).abs() < 1e-15);
        assert!(st.symplectic_floor() >= 0.5 - 1e-10);
    }

    #[test]
    fn beamsplitter_leaves_vacuum_invariant() {
        let mut st = CovarianceState::init_covariance(&vacuum_profile(2));
        st.apply_gate(&Gate::BeamSplitter {
            variant: BsVariant::Bs1,
            x: mode(Stream::A, 0, 0),
            y: mode(Stream::A, 0, 1),
        })
        .unwrap();
        let diff = (st.matrix() - DMatrix::identity(4, 4) * 0.5).abs().max();
        assert!(diff < 1e-15);
    }

    #[test]
    fn fourier_swaps_squeezed_axes() {
        let mut p = SqueezeProfile::new();
        p.insert(mode(Stream::A, 1, 0), Axis::Q, 0.7);
        let mut st = CovarianceState::init_covariance(&p);
        st.apply_gate(&Gate::Fourier {
            mode: mode(Stream::A, 1, 0),
        })
        .unwrap();
        assert!((st.matrix()[(0, 0)] - (1.4f64).exp() / 2.0).abs() < 1e-15);
        assert!((st.matrix()[(1, 1)] - (-1.4f64).exp() / 2.0).abs() < 1e-15);
        st.assert_physical(1e-10).unwrap();
    }

    #[test]
    fn delay_relabels_modes() {
        let mut p = SqueezeProfile::new();
        p.insert(mode(Stream::B, 2, 0), Axis::P, 0.5);
        let mut st = CovarianceState::init_covariance(&p);
        st.apply_gate(&Gate::Delay {
            stream: Stream::B,
            site: 2,
            shift: 3,
        })
        .unwrap();
        assert_eq!(st.modes(), &[mode(Stream::B, 2, 3)]);
    }

    #[test]
    fn hexagonal_covariance_matches_the_symbolic_gram_matrix() {
        let st = build_hexagonal(0, 0.8, Stream::A);
        let mut cov = CovarianceState::init_covariance(&st.profile);
        cov.replay(&st.program.gates, true).unwrap();
        for (mi, (qi, pi)) in st.outputs.iter() {
            for (mj, (qj, pj)) in st.outputs.iter() {
                for (ei, ai) in [(qi, Axis::Q), (pi, Axis::P)] {
                    for (ej, aj) in [(qj, Axis::Q), (pj, Axis::P)] {
                        let gram = weighted_inner(ei, ej, &st.profile).unwrap();
                        let ii = cov.quad_index(mi, ai).unwrap();
                        let jj = cov.quad_index(mj, aj).unwrap();
                        let num = cov.matrix()[(ii, jj)];
                        assert!(
                            (num - gram).abs() <= 1e-12 * gram.abs().max(1.0),
                            "V[{mi}:{ai:?}, {mj}:{aj:?}] numeric {num} vs gram {gram}"
                        );
                    }
                }
            }
        }
        cov.assert_physical(1e-10).unwrap();
    }

    #[test]
    fn erasing_an_uncoupled_vacuum_mode_changes_nothing_else() {
        let mut st = CovarianceState::init_covariance(&vacuum_profile(3));
        st.homodyne_erase_q(&mode(Stream::A, 0, 1)).unwrap();
        assert_eq!(st.mode_count(), 2);
        let diff = (st.matrix() - DMatrix::identity(4, 4) * 0.5).abs().max();
        assert!(diff < 1e-15);
    }

    #[test]
    fn erasing_one_arm_of_an_entangled_pair_stays_physical() {
        let mut p = SqueezeProfile::new();
        p.insert(mode(Stream::A, 0, 0), Axis::Q, 1.2);
        p.insert(mode(Stream::B, 0, 0), Axis::P, 1.2);
        let mut st = CovarianceState::init_covariance(&p);
        st.apply_gate(&Gate::BeamSplitter {
            variant: BsVariant::Bs1,
            x: mode(Stream::A, 0, 0),
            y: mode(Stream::B, 0, 0),
        })
        .unwrap();
        st.homodyne_erase_q(&mode(Stream::B, 0, 0)).unwrap();
        assert_eq!(st.mode_count(), 1);
        st.assert_physical(1e-10).unwrap();
        // purity ≤ 1: det(2V) ≥ 1
        let det = st.matrix().determinant() * 4.0;
        assert!(det >= 1.0 - 1e-12);
    }

    #[test]
    fn quadratic_form_basics() {
        let st = CovarianceState::init_covariance(&vacuum_profile(2));
        assert_eq!(st.quadratic_form_variance(&QuadExpr::zero()).unwrap(), 0.0);
        // variances of independent-mode sums add
        let m0 = mode(Stream::A, 0, 0);
        let m1 = mode(Stream::A, 0, 1);
        let e0 = QuadExpr::unit(QuadLabel::q(m0));
        let e1 = QuadExpr::unit(QuadLabel::p(m1));
        let sum = e0.add(&e1);
        let lhs = st.quadratic_form_variance(&sum).unwrap();
        let rhs =
            st.quadratic_form_variance(&e0).unwrap() + st.quadratic_form_variance(&e1).unwrap();
        assert!((lhs - rhs).abs() < 1e-15);
        // dropped mode is an error
        let mut st2 = st.clone();
        st2.homodyne_erase_q(&m1).unwrap();
        assert!(matches!(
            st2.quadratic_form_variance(&e1),
            Err(OracleError::DroppedMode(_))
        ));
    }

    #[test]
    fn csv_dump_names_the_quadrature_columns() {
        let st = CovarianceState::init_covariance(&vacuum_profile(2));
        let csv = st.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "q[A:0:0],p[A:0:0],q[A:0:1],p[A:0:1]");
        assert_eq!(lines.count(), 4);
        assert!(csv.contains("0.5"));
    }

    #[test]
    fn conditional_variance_matches_schur_update_on_a_pair() {
        let st = crate::builders::build_epr1d(2, 0.9, 0.9).unwrap();
        let measured: Vec<ModeId> = st.erased.iter().copied().collect();
        let live: Vec<ModeId> = st.live_modes();
        let expr = QuadExpr::unit(QuadLabel::q(live[0]));

        let symbolic = conditional_variance(&st, &expr, &measured).unwrap();
        let mut cov = CovarianceState::init_covariance(&st.profile);
        cov.replay(&st.program.gates, true).unwrap();
        let numeric = cov.quadratic_form_variance(&expr).unwrap();
        assert!((symbolic - numeric).abs() <= 1e-12 * numeric.abs().max(1.0));
    }
}

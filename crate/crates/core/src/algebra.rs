//! Heisenberg-picture quadrature algebra.
//!
//! A [`QuadExpr`] is a sparse linear combination of mode quadratures with
//! exact [`RingCoeff`] coefficients. The passive gates of the optical circuits
//! (50:50 beam splitters in two phase conventions, quarter rotations, delay
//! relabeling) act on (q, p) expression pairs. All values are immutable;
//! operations return fresh expressions.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ring::RingCoeff;

#[derive(Debug, Error)]
pub enum AlgebraError {
    #[error("beam splitter ports carry identical expressions")]
    IdenticalPorts,
    #[error("malformed mode id: {0}")]
    BadModeId(String),
}

/// Which of the two time-multiplexed spatial beams a mode travels on.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stream {
    A,
    B,
}

impl fmt::Display for Stream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stream::A => write!(f, "A"),
            Stream::B => write!(f, "B"),
        }
    }
}

/// Quadrature axis: position (Q) or momentum (P).
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Q,
    P,
}

impl Axis {
    pub fn other(self) -> Axis {
        match self {
            Axis::Q => Axis::P,
            Axis::P => Axis::Q,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Axis::Q => write!(f, "q"),
            Axis::P => write!(f, "p"),
        }
    }
}

/// One qumode: stream, site within a hexagonal cluster (0 for the 1-D chain),
/// and temporal slot. Ordering is (stream, site, temporal) for canonical
/// printing.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ModeId {
    pub stream: Stream,
    pub site: u8,
    pub temporal: u32,
}

impl ModeId {
    pub fn new(stream: Stream, site: u8, temporal: u32) -> Self {
        debug_assert!(site <= 6);
        Self {
            stream,
            site,
            temporal,
        }
    }

    /// Pivot key used by deterministic reductions: time first, then stream
    /// and site.
    pub fn schedule_key(&self) -> (u32, Stream, u8) {
        (self.temporal, self.stream, self.site)
    }
}

impl fmt::Display for ModeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.stream, self.site, self.temporal)
    }
}

impl FromStr for ModeId {
    type Err = AlgebraError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || AlgebraError::BadModeId(s.to_string());
        let mut it = s.split(':');
        let stream = match it.next().ok_or_else(bad)? {
            "A" => Stream::A,
            "B" => Stream::B,
            _ => return Err(bad()),
        };
        let site: u8 = it.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let temporal: u32 = it.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        if it.next().is_some() || site > 6 {
            return Err(bad());
        }
        Ok(ModeId {
            stream,
            site,
            temporal,
        })
    }
}

/// One quadrature of one mode.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct QuadLabel {
    pub mode: ModeId,
    pub axis: Axis,
}

impl QuadLabel {
    pub fn q(mode: ModeId) -> Self {
        Self {
            mode,
            axis: Axis::Q,
        }
    }

    pub fn p(mode: ModeId) -> Self {
        Self {
            mode,
            axis: Axis::P,
        }
    }
}

impl fmt::Display for QuadLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.axis, self.mode)
    }
}

/// Sparse linear combination of quadratures; no zero coefficients are stored.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct QuadExpr {
    terms: BTreeMap<QuadLabel, RingCoeff>,
}

impl QuadExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn term(label: QuadLabel, coeff: RingCoeff) -> Self {
        let mut e = Self::zero();
        e.add_term(label, coeff);
        e
    }

    pub fn unit(label: QuadLabel) -> Self {
        Self::term(label, RingCoeff::one())
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, label: &QuadLabel) -> RingCoeff {
        self.terms
            .get(label)
            .cloned()
            .unwrap_or_else(RingCoeff::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&QuadLabel, &RingCoeff)> {
        self.terms.iter()
    }

    pub fn labels(&self) -> impl Iterator<Item = &QuadLabel> {
        self.terms.keys()
    }

    pub fn add_term(&mut self, label: QuadLabel, coeff: RingCoeff) {
        if coeff.is_zero() {
            return;
        }
        let entry = self.terms.entry(label).or_default();
        *entry += &coeff;
        if entry.is_zero() {
            self.terms.remove(&label);
        }
    }

    pub fn add(&self, rhs: &QuadExpr) -> QuadExpr {
        let mut out = self.clone();
        for (l, c) in rhs.iter() {
            out.add_term(*l, c.clone());
        }
        out
    }

    pub fn sub(&self, rhs: &QuadExpr) -> QuadExpr {
        let mut out = self.clone();
        for (l, c) in rhs.iter() {
            out.add_term(*l, -c);
        }
        out
    }

    pub fn neg(&self) -> QuadExpr {
        self.scale(&(-RingCoeff::one()))
    }

    pub fn scale(&self, s: &RingCoeff) -> QuadExpr {
        if s.is_zero() {
            return QuadExpr::zero();
        }
        let mut out = QuadExpr::zero();
        for (l, c) in self.iter() {
            out.add_term(*l, c * s);
        }
        out
    }

    /// self + s·rhs, the elimination workhorse.
    pub fn add_scaled(&self, s: &RingCoeff, rhs: &QuadExpr) -> QuadExpr {
        let mut out = self.clone();
        for (l, c) in rhs.iter() {
            out.add_term(*l, c * s);
        }
        out
    }

    /// Replace every label by an expression image; linearity does the rest.
    pub fn substitute<F>(&self, mut image: F) -> QuadExpr
    where
        F: FnMut(&QuadLabel) -> QuadExpr,
    {
        let mut out = QuadExpr::zero();
        for (l, c) in self.iter() {
            let img = image(l);
            for (l2, c2) in img.iter() {
                out.add_term(*l2, c2 * c);
            }
        }
        out
    }

    /// Σ coeff², an exact ring element.
    pub fn norm_sq(&self) -> RingCoeff {
        let mut acc = RingCoeff::zero();
        for (_, c) in self.iter() {
            acc += &(c * c);
        }
        acc
    }

    /// Coefficient of i in the canonical commutator [self, rhs]:
    /// Σ over modes of (x_q·y_p − x_p·y_q).
    pub fn commutator(&self, rhs: &QuadExpr) -> RingCoeff {
        let mut acc = RingCoeff::zero();
        for (l, c) in self.iter() {
            let partner = QuadLabel {
                mode: l.mode,
                axis: l.axis.other(),
            };
            let other = rhs.coeff(&partner);
            if other.is_zero() {
                continue;
            }
            match l.axis {
                Axis::Q => acc += &(c * &other),
                Axis::P => acc -= &(c * &other),
            }
        }
        acc
    }
}

impl fmt::Display for QuadExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (i, (l, c)) in self.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({})·{}", c, l)?;
        }
        Ok(())
    }
}

/// Squeezed axis and squeezing parameter of one source mode.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Squeeze {
    pub axis: Axis,
    pub r: f64,
}

/// Per-source-mode squeezing assignment. Variances of the initial quadratures
/// are e^{−2r}/2 on the squeezed axis and e^{+2r}/2 on the other; the e^{±r}
/// factors never enter [`QuadExpr`] coefficients.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SqueezeProfile {
    entries: BTreeMap<ModeId, Squeeze>,
}

impl SqueezeProfile {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, mode: ModeId, axis: Axis, r: f64) {
        self.entries.insert(mode, Squeeze { axis, r });
    }

    pub fn get(&self, mode: &ModeId) -> Option<Squeeze> {
        self.entries.get(mode).copied()
    }

    pub fn modes(&self) -> impl Iterator<Item = (&ModeId, &Squeeze)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Variance of one initial quadrature under this profile.
    pub fn quad_variance(&self, label: &QuadLabel) -> Option<f64> {
        let sq = self.get(&label.mode)?;
        let sign = if sq.axis == label.axis { -1.0 } else { 1.0 };
        Some((sign * 2.0 * sq.r).exp() / 2.0)
    }

    /// Same profile with every r replaced by a common value.
    pub fn with_uniform_r(&self, r: f64) -> SqueezeProfile {
        let mut out = SqueezeProfile::new();
        for (m, s) in self.modes() {
            out.insert(*m, s.axis, r);
        }
        out
    }
}

/// Squeezing level in dB for parameter r: 10·log10(e^{−2r}).
pub fn squeeze_db_from_r(r: f64) -> f64 {
    10.0 * (-2.0 * r) * std::f64::consts::LOG10_E
}

/// Inverse of [`squeeze_db_from_r`]; more negative dB means more squeezing.
pub fn r_from_squeeze_db(db: f64) -> f64 {
    -db * std::f64::consts::LN_10 / 20.0
}

/// The two 50:50 beam-splitter phase conventions used by the circuits:
/// `Bs1` mixes (x, y) ↦ ((x−y)/√2, (x+y)/√2), `Bs2` mixes
/// (x, y) ↦ ((x+y)/√2, (x−y)/√2).
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BsVariant {
    Bs1,
    Bs2,
}

impl BsVariant {
    /// Row-major 2×2 mode-mixing matrix, in units of 1/√2.
    pub fn matrix(self) -> [[i64; 2]; 2] {
        match self {
            BsVariant::Bs1 => [[1, -1], [1, 1]],
            BsVariant::Bs2 => [[1, 1], [1, -1]],
        }
    }

    /// Inverse mixing matrix, also in units of 1/√2. `Bs2` is an involution.
    pub fn inverse_matrix(self) -> [[i64; 2]; 2] {
        match self {
            BsVariant::Bs1 => [[1, 1], [-1, 1]],
            BsVariant::Bs2 => [[1, 1], [1, -1]],
        }
    }
}

/// Identity pair (q̂, p̂) of a fresh source mode. Squeezing stays in the
/// profile; the expressions are plain unit quadratures.
pub fn initial_quadratures(mode: ModeId) -> (QuadExpr, QuadExpr) {
    (
        QuadExpr::unit(QuadLabel::q(mode)),
        QuadExpr::unit(QuadLabel::p(mode)),
    )
}

fn mix_pairwise(m: [[i64; 2]; 2], x: &QuadExpr, y: &QuadExpr) -> (QuadExpr, QuadExpr) {
    let inv_sqrt2 = RingCoeff::inv_sqrt2();
    let c = |v: i64| RingCoeff::from_int(v) * &inv_sqrt2;
    (
        x.scale(&c(m[0][0])).add(&y.scale(&c(m[0][1]))),
        x.scale(&c(m[1][0])).add(&y.scale(&c(m[1][1]))),
    )
}

/// Mix two (q, p) expression pairs on a 50:50 beam splitter. Commutators are
/// preserved exactly; feeding the same expression pair to both ports is
/// rejected.
#[allow(clippy::type_complexity)]
pub fn apply_beamsplitter(
    variant: BsVariant,
    x: (&QuadExpr, &QuadExpr),
    y: (&QuadExpr, &QuadExpr),
) -> Result<((QuadExpr, QuadExpr), (QuadExpr, QuadExpr)), AlgebraError> {
    if x.0 == y.0 && x.1 == y.1 {
        return Err(AlgebraError::IdenticalPorts);
    }
    let m = variant.matrix();
    let (q0, q1) = mix_pairwise(m, x.0, y.0);
    let (p0, p1) = mix_pairwise(m, x.1, y.1);
    Ok(((q0, p0), (q1, p1)))
}

/// Quarter rotation in the convention used when transporting stabilizer
/// expressions: (q, p) ↦ (p, −q). Four applications are the identity.
pub fn apply_fourier(x: (&QuadExpr, &QuadExpr)) -> (QuadExpr, QuadExpr) {
    (x.1.clone(), x.0.neg())
}

/// Quarter rotation in the opposite phase convention, (q, p) ↦ (−p, q); this
/// is the direction used when expanding circuit outputs over source
/// quadratures (annihilation operator picture â ↦ iâ).
pub fn apply_fourier_inv(x: (&QuadExpr, &QuadExpr)) -> (QuadExpr, QuadExpr) {
    (x.1.neg(), x.0.clone())
}

/// Shift the temporal index of every label on (stream, site) by `shift`;
/// models an optical delay line as pure index bookkeeping.
pub fn relabel_delay(expr: &QuadExpr, stream: Stream, site: u8, shift: u32) -> QuadExpr {
    let mut out = QuadExpr::zero();
    for (l, c) in expr.iter() {
        let mut label = *l;
        if l.mode.stream == stream && l.mode.site == site {
            label.mode.temporal += shift;
        }
        out.add_term(label, c.clone());
    }
    out
}

//! Circuit builders: the 1-D extended-EPR chain, the six-mode hexagonal
//! cluster, and the time-multiplexed topological lattice.
//!
//! A builder produces an ordered [`GateProgram`] plus the exact
//! Heisenberg-picture expansion of every window mode over the source
//! quadratures. Delay lines are index bookkeeping: they re-key modes to their
//! shifted temporal slot. Modes that end up measured (stream B, scheduling
//! orphans, lattice margin) are recorded in `erased`; boundary trimming adds
//! to `trimmed`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{
    apply_beamsplitter, apply_fourier_inv, initial_quadratures, Axis, BsVariant, ModeId, QuadExpr,
    QuadLabel, SqueezeProfile, Stream,
};

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("a chain needs at least 2 temporal slots, got {0}")]
    TooFewSlots(u32),
    #[error("invalid lattice dimensions: {0}")]
    BadLattice(String),
    #[error("gate touches unknown mode {0}")]
    UnknownMode(ModeId),
    #[error("state was not built from the given lattice spec")]
    SpecMismatch,
}

/// One record of the ordered gate program.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Gate {
    BeamSplitter {
        variant: BsVariant,
        x: ModeId,
        y: ModeId,
    },
    Fourier {
        mode: ModeId,
    },
    Delay {
        stream: Stream,
        site: u8,
        shift: u32,
    },
    MeasureQ {
        mode: ModeId,
    },
    MeasureP {
        mode: ModeId,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GateProgram {
    pub gates: Vec<Gate>,
}

impl GateProgram {
    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }
}

/// Basal-plane width/height, temporal depth and squeezing of a topological
/// lattice. The basal plane holds V = N·M sites.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub n: u32,
    pub m: u32,
    pub t: u32,
    pub r: f64,
}

impl LatticeSpec {
    pub fn new(n: u32, m: u32, t: u32, r: f64) -> Result<Self, BuildError> {
        if n < 2 || m < 2 {
            return Err(BuildError::BadLattice(format!(
                "basal plane must be at least 2x2, got {n}x{m}"
            )));
        }
        if t < 1 {
            return Err(BuildError::BadLattice(
                "need at least one temporal layer".into(),
            ));
        }
        Ok(Self { n, m, t, r })
    }

    pub fn v(&self) -> u32 {
        self.n * self.m
    }

    /// Scheduling window: enough slots that every delayed partner referenced
    /// by the lattice layers exists.
    pub fn window_slots(&self) -> u32 {
        self.v() * self.t + self.n + self.v() + 1
    }

    /// Delay, in slots, applied to stream-B modes of a hexagonal site.
    pub fn site_delay(&self, site: u8) -> u32 {
        let (n, v) = (self.n, self.v());
        match site {
            1 => 0,
            2 => 1,
            3 => n + 1,
            4 => n + v + 1,
            5 => n + v,
            6 => v,
            _ => unreachable!("hexagonal sites are 1..=6"),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateKind {
    Epr1d,
    Hexagonal,
    Topological,
}

/// A built circuit: program, per-mode output expansions over source
/// quadratures, squeezing profile, and the erased/trimmed bookkeeping.
/// `outputs` holds every window mode; [`BuiltState::live_outputs`] filters to
/// the un-erased, un-trimmed ones.
#[derive(Clone, Debug)]
pub struct BuiltState {
    pub kind: StateKind,
    pub lattice: Option<LatticeSpec>,
    pub program: GateProgram,
    pub outputs: BTreeMap<ModeId, (QuadExpr, QuadExpr)>,
    pub profile: SqueezeProfile,
    pub erased: BTreeSet<ModeId>,
    pub trimmed: BTreeSet<ModeId>,
}

impl BuiltState {
    pub fn is_live(&self, mode: &ModeId) -> bool {
        self.outputs.contains_key(mode)
            && !self.erased.contains(mode)
            && !self.trimmed.contains(mode)
    }

    pub fn live_outputs(&self) -> impl Iterator<Item = (&ModeId, &(QuadExpr, QuadExpr))> {
        self.outputs
            .iter()
            .filter(|(m, _)| !self.erased.contains(m) && !self.trimmed.contains(m))
    }

    pub fn live_modes(&self) -> Vec<ModeId> {
        self.live_outputs().map(|(m, _)| *m).collect()
    }

    /// Expansion of one window quadrature over source quadratures.
    pub fn expansion(&self, label: &QuadLabel) -> Option<&QuadExpr> {
        self.outputs
            .get(&label.mode)
            .map(|(q, p)| match label.axis {
                Axis::Q => q,
                Axis::P => p,
            })
    }

    /// Substitute window labels by their source-quadrature expansions.
    pub fn expand(&self, expr: &QuadExpr) -> Result<QuadExpr, BuildError> {
        let mut missing = None;
        let out = expr.substitute(|label| match self.expansion(label) {
            Some(e) => e.clone(),
            None => {
                missing.get_or_insert(label.mode);
                QuadExpr::zero()
            }
        });
        match missing {
            Some(m) => Err(BuildError::UnknownMode(m)),
            None => Ok(out),
        }
    }
}

/// Replay a program over the output map, keeping measured modes in the map
/// but recording them as erased.
fn replay(
    outputs: &mut BTreeMap<ModeId, (QuadExpr, QuadExpr)>,
    erased: &mut BTreeSet<ModeId>,
    gates: &[Gate],
) -> Result<(), BuildError> {
    for gate in gates {
        match gate {
            Gate::BeamSplitter { variant, x, y } => {
                let xp = outputs.remove(x).ok_or(BuildError::UnknownMode(*x))?;
                let yp = outputs.remove(y).ok_or(BuildError::UnknownMode(*y))?;
                let ((q0, p0), (q1, p1)) =
                    apply_beamsplitter(*variant, (&xp.0, &xp.1), (&yp.0, &yp.1))
                        .expect("distinct window modes cannot alias");
                outputs.insert(*x, (q0, p0));
                outputs.insert(*y, (q1, p1));
            }
            Gate::Fourier { mode } => {
                let pair = outputs.remove(mode).ok_or(BuildError::UnknownMode(*mode))?;
                // outputs expand in the annihilation-operator convention
                let rotated = apply_fourier_inv((&pair.0, &pair.1));
                outputs.insert(*mode, rotated);
            }
            Gate::Delay {
                stream,
                site,
                shift,
            } => {
                if *shift == 0 {
                    continue;
                }
                let moved: Vec<ModeId> = outputs
                    .keys()
                    .filter(|m| m.stream == *stream && m.site == *site)
                    .copied()
                    .collect();
                let mut shifted = Vec::with_capacity(moved.len());
                for m in moved {
                    let pair = outputs.remove(&m).expect("key just listed");
                    let key = ModeId::new(m.stream, m.site, m.temporal + shift);
                    shifted.push((key, pair));
                }
                for (key, pair) in shifted {
                    outputs.insert(key, pair);
                }
            }
            Gate::MeasureQ { mode } | Gate::MeasureP { mode } => {
                if !outputs.contains_key(mode) {
                    return Err(BuildError::UnknownMode(*mode));
                }
                erased.insert(*mode);
            }
        }
    }
    Ok(())
}

/// 1-D extended-EPR chain over `slots` temporal slots. Stream A is
/// q-squeezed (parameter `r_a`), stream B p-squeezed (`r_b`). Two beam
/// splitter rounds sandwich a one-slot delay on B; the two scheduling orphans
/// at the window ends are measured out.
pub fn build_epr1d(slots: u32, r_a: f64, r_b: f64) -> Result<BuiltState, BuildError> {
    if slots < 2 {
        return Err(BuildError::TooFewSlots(slots));
    }
    let mut profile = SqueezeProfile::new();
    let mut outputs = BTreeMap::new();
    for k in 0..slots {
        let a = ModeId::new(Stream::A, 0, k);
        let b = ModeId::new(Stream::B, 0, k);
        profile.insert(a, Axis::Q, r_a);
        profile.insert(b, Axis::P, r_b);
        outputs.insert(a, initial_quadratures(a));
        outputs.insert(b, initial_quadratures(b));
    }

    let mut gates = Vec::new();
    for k in 0..slots {
        gates.push(Gate::BeamSplitter {
            variant: BsVariant::Bs1,
            x: ModeId::new(Stream::A, 0, k),
            y: ModeId::new(Stream::B, 0, k),
        });
    }
    gates.push(Gate::Delay {
        stream: Stream::B,
        site: 0,
        shift: 1,
    });
    for k in 1..slots {
        gates.push(Gate::BeamSplitter {
            variant: BsVariant::Bs1,
            x: ModeId::new(Stream::A, 0, k),
            y: ModeId::new(Stream::B, 0, k),
        });
    }
    // window orphans: A at slot 0 misses the second round, the delayed B at
    // slot `slots` has no partner
    gates.push(Gate::MeasureQ {
        mode: ModeId::new(Stream::A, 0, 0),
    });
    gates.push(Gate::MeasureQ {
        mode: ModeId::new(Stream::B, 0, slots),
    });

    let mut erased = BTreeSet::new();
    replay(&mut outputs, &mut erased, &gates)?;
    Ok(BuiltState {
        kind: StateKind::Epr1d,
        lattice: None,
        program: GateProgram { gates },
        outputs,
        profile,
        erased,
        trimmed: BTreeSet::new(),
    })
}

/// Append the six-mode hexagonal generator gates for one stream and slot:
/// couple (1,6), (5,4), (3,2), then (1,4), (5,2), (3,6), then rotate the odd
/// sites.
fn hexagonal_gates(gates: &mut Vec<Gate>, stream: Stream, slot: u32) {
    for (i, j) in [(1u8, 6u8), (5, 4), (3, 2)] {
        gates.push(Gate::BeamSplitter {
            variant: BsVariant::Bs1,
            x: ModeId::new(stream, i, slot),
            y: ModeId::new(stream, j, slot),
        });
    }
    for (i, j) in [(1u8, 4u8), (5, 2), (3, 6)] {
        gates.push(Gate::BeamSplitter {
            variant: BsVariant::Bs1,
            x: ModeId::new(stream, i, slot),
            y: ModeId::new(stream, j, slot),
        });
    }
    for site in [1u8, 3, 5] {
        gates.push(Gate::Fourier {
            mode: ModeId::new(stream, site, slot),
        });
    }
}

fn hexagonal_sources(
    profile: &mut SqueezeProfile,
    outputs: &mut BTreeMap<ModeId, (QuadExpr, QuadExpr)>,
    stream: Stream,
    slot: u32,
    r: f64,
) {
    for site in 1..=6u8 {
        let mode = ModeId::new(stream, site, slot);
        let axis = if site % 2 == 1 { Axis::P } else { Axis::Q };
        profile.insert(mode, axis, r);
        outputs.insert(mode, initial_quadratures(mode));
    }
}

/// Six-mode hexagonal cluster at one temporal slot. Odd sites are
/// p-squeezed, even sites q-squeezed.
pub fn build_hexagonal(slot: u32, r: f64, stream: Stream) -> BuiltState {
    let mut profile = SqueezeProfile::new();
    let mut outputs = BTreeMap::new();
    hexagonal_sources(&mut profile, &mut outputs, stream, slot, r);
    let mut gates = Vec::new();
    hexagonal_gates(&mut gates, stream, slot);
    let mut erased = BTreeSet::new();
    replay(&mut outputs, &mut erased, &gates).expect("hexagonal program touches only its sources");
    BuiltState {
        kind: StateKind::Hexagonal,
        lattice: None,
        program: GateProgram { gates },
        outputs,
        profile,
        erased,
        trimmed: BTreeSet::new(),
    }
}

/// Time-multiplexed topological lattice.
///
/// Per slot a hexagonal cluster is built on each stream; stream-B sites
/// 2..=6 pass through delay lines of 1, N+1, N+V+1, N+V and V slots; each
/// delayed B mode is coupled to the A mode of equal site and timing on a
/// `Bs2` splitter. All B modes are then measured in q (quantum erasure), as
/// are A modes whose partner would fall outside the window and A modes past
/// the requested temporal extent, so the live graph is exactly the N×M×T
/// lattice.
pub fn build_topological(spec: &LatticeSpec) -> Result<BuiltState, BuildError> {
    let spec = LatticeSpec::new(spec.n, spec.m, spec.t, spec.r)?;
    let window = spec.window_slots();
    let lattice_slots = spec.v() * spec.t;

    let mut profile = SqueezeProfile::new();
    let mut outputs = BTreeMap::new();
    let mut gates = Vec::new();
    for k in 0..window {
        hexagonal_sources(&mut profile, &mut outputs, Stream::A, k, spec.r);
        hexagonal_sources(&mut profile, &mut outputs, Stream::B, k, spec.r);
        hexagonal_gates(&mut gates, Stream::A, k);
        hexagonal_gates(&mut gates, Stream::B, k);
    }

    for site in 2..=6u8 {
        gates.push(Gate::Delay {
            stream: Stream::B,
            site,
            shift: spec.site_delay(site),
        });
    }

    // couple equal-timing pairs; a site's pairs start where its delayed B
    // modes first overlap the A window
    for site in 1..=6u8 {
        for t in spec.site_delay(site)..window {
            gates.push(Gate::BeamSplitter {
                variant: BsVariant::Bs2,
                x: ModeId::new(Stream::A, site, t),
                y: ModeId::new(Stream::B, site, t),
            });
        }
    }

    // quantum erasure of all B modes (post-delay labels)
    for site in 1..=6u8 {
        let d = spec.site_delay(site);
        for t in d..window + d {
            gates.push(Gate::MeasureQ {
                mode: ModeId::new(Stream::B, site, t),
            });
        }
    }
    // A modes that never coupled and the scheduling margin beyond the lattice
    for site in 1..=6u8 {
        for t in 0..window {
            if t < spec.site_delay(site) || t >= lattice_slots {
                gates.push(Gate::MeasureQ {
                    mode: ModeId::new(Stream::A, site, t),
                });
            }
        }
    }

    let mut erased = BTreeSet::new();
    replay(&mut outputs, &mut erased, &gates)?;
    Ok(BuiltState {
        kind: StateKind::Topological,
        lattice: Some(spec),
        program: GateProgram { gates },
        outputs,
        profile,
        erased,
        trimmed: BTreeSet::new(),
    })
}

/// Remove the A modes outside the upper and right sides of the basal plane,
/// layer by layer, so the live plane matches the distance-d surface-code
/// footprint. Modes already erased by the window policy are skipped; the
/// operation is idempotent.
pub fn trim_boundary(mut state: BuiltState, spec: &LatticeSpec) -> Result<BuiltState, BuildError> {
    if state.kind != StateKind::Topological {
        return Err(BuildError::SpecMismatch);
    }
    match state.lattice {
        Some(l) if l == *spec => {}
        _ => return Err(BuildError::SpecMismatch),
    }
    let v = spec.v();
    for layer in 0..spec.t {
        let base = layer * v;
        let mut mark = |site: u8, offset: u32| {
            let mode = ModeId::new(Stream::A, site, base + offset);
            if state.outputs.contains_key(&mode) && !state.erased.contains(&mode) {
                state.trimmed.insert(mode);
            }
        };
        for nu in 1..=spec.n {
            let c = nu * spec.m - 1;
            mark(2, c);
            mark(3, c);
        }
        for up in 0..spec.m {
            let c = spec.m * (spec.n - 1) + up;
            mark(1, c);
            mark(2, c);
        }
    }
    Ok(state)
}

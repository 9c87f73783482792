//! Exact construction and verification of time-multiplexed
//! continuous-variable cluster states.
//!
//! The crate builds three optical circuits — the 1-D extended-EPR chain, the
//! six-mode hexagonal cluster, and the 3-D topological lattice assembled
//! from hexagonal clusters through delay lines — in an exact
//! Heisenberg-picture algebra over ℚ(√2). On top of the builders sit:
//!
//! - [`nullifier`]: stabilizer derivation and canonical reduction, the
//!   signed weighted adjacency, and the pairwise inseparability checks with
//!   their squeezing thresholds;
//! - [`oracle`]: an independent covariance-matrix simulation of the same
//!   programs, including homodyne quantum erasure, used to cross-check every
//!   symbolic variance numerically;
//! - [`errorprop`]: propagation of finite-squeezing displacement errors
//!   through CZ edges and teleportation hops, reproducing the sign-driven
//!   cancellation on the lattice;
//! - [`export`]: deterministic JSON/DOT/CSV documents.
//!
//! ```
//! use cvcluster::{build_topological, full_lattice_verify, LatticeSpec};
//!
//! let spec = LatticeSpec::new(2, 2, 2, 0.6).unwrap();
//! let state = build_topological(&spec).unwrap();
//! let report = full_lattice_verify(&state).unwrap();
//! assert!(report.all_satisfied);
//! assert!((report.threshold_e2r - 1.0 / 3.0).abs() < 1e-8);
//! ```

pub mod algebra;
pub mod builders;
pub mod errorprop;
pub mod export;
pub mod nullifier;
pub mod oracle;
pub mod ring;

pub use algebra::{Axis, ModeId, QuadExpr, QuadLabel, SqueezeProfile, Stream};
pub use builders::{
    build_epr1d, build_hexagonal, build_topological, trim_boundary, BuiltState, LatticeSpec,
};
pub use nullifier::{derive_nullifiers, full_lattice_verify, reduce_to_canonical};
pub use oracle::CovarianceState;
pub use ring::RingCoeff;

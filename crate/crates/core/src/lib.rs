//! Zero-noise extrapolation by identity insertion.
//!
//! The crate is organised bottom-up:
//!
//! - [`circuit`]: gate-level circuits (CNOT plus arbitrary one-qubit unitaries).
//! - [`sim`]: an exact density-matrix simulator with two-qubit depolarizing
//!   noise and amplitude damping.
//! - [`insertion`]: folding and the FIIM / RIIM / LIIM / SIIM mitigation plans
//!   with exact rational coefficients.
//! - [`estimator`]: shot sampling, per-circuit estimates, plan combination
//!   with variance propagation, and shot allocation.
//! - [`ensemble`]: device profiles and parallel execution of plans over a
//!   set of devices with differing error rates.
//!
//! Bit-ordering convention: qubit 0 is the least-significant bit of every
//! basis index and of the integer observable. Bitstrings are written in
//! qubit order, so `"10"` means qubit 0 is `1` and qubit 1 is `0` (index 1).

pub mod circuit;
pub mod ensemble;
mod error;
pub mod estimator;
pub mod insertion;
pub mod rng;
pub mod sim;

pub use circuit::{Circuit, Gate, QubitId};
pub use error::{Error, Result};
pub use estimator::{Estimate, ShotBudget, ShotResult};
pub use insertion::{MitigationPlan, PlanEntry, PlanMethod, ReplicationVector};
pub use sim::{DensityMatrix, NoiseModel, Observable};

//! Simulator and closed-loop optimizer for observation-assisted quantum
//! control.
//!
//! The crate propagates density matrices of small multilevel systems under
//! shaped control fields, applies instantaneous and continuous quantum
//! measurements, and optimizes fields and/or measurements with a genetic
//! algorithm. Observations act as indirect controls: a projective "kick" or a
//! continuous dephasing term can cooperate with the field (anti-Zeno assisted
//! population transfer), break a dynamical symmetry, or lock population out
//! of an undesired state (Zeno protection).
//!
//! Entry points:
//! - [`quantum`]: density matrices and the instantaneous-measurement algebra
//! - [`dynamics`]: master-equation propagation with measurement events
//! - [`field`]: the two control-field families and the fluence functional
//! - [`observation`]: declarative observation plans and their genotypes
//! - [`ga`]: the genetic optimizer and cost functionals
//! - [`models`]: the four bundled multilevel systems
//! - [`experiments`]: scenario files and table-reproduction drivers
//! - [`oracle`]: independent brute-force verifiers
//!
//! See the crate examples for one runnable program per capability, and the
//! `zenoctl` binary for the scenario/table command-line interface.

pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod field;
pub mod ga;
pub mod models;
pub mod observation;
pub mod oracle;
pub mod quantum;

pub use error::{Error, Result};

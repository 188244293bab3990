//! Verification of the constructed triple `(X, Y, Z)`:
//!
//! - [`girsanov`] — law identity of the simulated forward process against
//!   reweighted driftless paths (stochastic exponential);
//! - [`residual`] — discrete BSDE residual and terminal matching
//!   `Y_T = h(X_T)`;
//! - [`convergence`] — Cauchy diagnostics across mollification levels under
//!   common random numbers;
//! - [`regularity`] — Sobolev flow derivatives in the initial point and
//!   Malliavin bound tables.
//!
//! All checks are pure functions of their inputs and produce serializable
//! report types; pass/fail thresholds live with the caller.

pub mod convergence;
pub mod girsanov;
pub mod regularity;
pub mod residual;
pub mod stats;

pub use convergence::{cauchy_convergence, CauchyLevel, ConvergenceReport, LevelGap};
pub use girsanov::{girsanov_law_check, GirsanovReport, KsCheck};
pub use regularity::{
    malliavin_regularity_summary, sobolev_flow_check, FlowRow, MalliavinSummary, RegLevel,
    RegularityFlags, RegularityReport,
};
pub use residual::{bsde_residual, terminal_match};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("need at least two mollification levels, got {0}")]
    TooFewLevels(usize),
    #[error("mismatched inputs: {0}")]
    Mismatched(String),
    #[error("the Y Sobolev check requires a scalar backward component, got l = {0}")]
    YSobolevNeedsScalar(usize),
    #[error(transparent)]
    Sim(#[from] crate::simulate::SimError),
}

//! Physics-informed neural network solvers for SIR inverse problems.
//!
//! - [`nn`]: small MLPs with exact time derivatives and parameter gradients
//! - [`sir`]: SIR equations, RK4 simulator, reproduction number, reduced model
//! - [`inverse`]: the α/β identification and time-dependent R_t solvers
//! - [`data`]: case CSV ingestion, recovery-queue preprocessing, synthetic data
//! - [`report`]: repeated experiments, correlations, CSV/JSON/SVG output

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod inverse;
pub mod nn;
pub mod report;
pub mod sir;

pub use error::{Error, Result};

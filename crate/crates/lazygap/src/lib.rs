//! Experiment harness for the `lazygap-core` numerics: JSON configs, sweeps,
//! SGD evolution runs, landscape reports, the acceptance suite and CSV output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accept;
pub mod config;
pub mod error;
pub mod harness;
pub mod record;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
pub use record::{RiskRecord, RunOutput};

//! Runtime around `lancelot-core`: thread pool, clocks, IDX datasets,
//! experiment and ablation drivers, calibration cache, reports and the
//! acceptance checks.

pub mod ablate;
pub mod acceptance;
pub mod calibrate;
pub mod cli;
pub mod config;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod idx;
pub mod report;

pub use error::{Error, Result};
pub use lancelot_core as core;

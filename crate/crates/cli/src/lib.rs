//! Library half of the `oulab` binary: config parsing, synthetic data,
//! study runners, and plot rendering. Kept as a library so the integration
//! suite can drive full studies in-process.

pub mod config;
pub mod data;
pub mod plot;
pub mod studies;

pub use config::{Experiment, StudyKind};
pub use studies::run;

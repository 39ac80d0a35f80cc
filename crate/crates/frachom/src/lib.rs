//! Experiment runner, report files and the `frachom` command line for the
//! numerical core in `frachom-core`.
//!
//! An experiment is described by one JSON document ([`config::ExperimentConfig`]).
//! [`runner::run`] turns it into a list of in-memory [`report::Artifact`]s plus
//! verdicts, and [`report::emit_report`] writes them with a `MANIFEST`.

pub mod checks;
pub mod config;
pub mod error;
pub mod export;
pub mod report;
pub mod runner;

pub use config::{Command, ExperimentConfig};
pub use error::RunError;
pub use runner::{run, Outcome};

//! Experiment harness for the attraction-repulsion chemotaxis lab: TOML
//! configs, presets, run orchestration, verdicts and on-disk formats.

pub mod config;
pub mod error;
pub mod experiment;
pub mod formats;
pub mod presets;
pub mod verdicts;

pub use config::{Config, ExperimentKind};
pub use error::{HarnessError, Result};
pub use experiment::{convergence_study, prepare, run_experiment, simulate, verify, Prepared, Report, Simulation};
pub use verdicts::Verdict;

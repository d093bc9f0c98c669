//! Std side of the swarm optimizer: external evaluators, advisor clients,
//! the experiment harness, reports and the command-line front end.

pub mod advisor;
pub mod cli;
pub mod error;
pub mod external;
pub mod harness;
pub mod parallel;
pub mod report;
pub mod stats;

pub use error::{Error, Result};
pub use harness::{run_trials, AdvisorSpec, CellResult, ExperimentResults, ExperimentSpec, ObjectiveSpec};
pub use stats::{summarize, TrialStatistics};

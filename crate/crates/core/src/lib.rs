//! Particle swarm optimization with advisor-guided particle injection.
//!
//! This crate is `no_std` (it needs `alloc`). It holds the swarm state
//! machine, the built-in objective functions, prompt rendering and response
//! parsing for advisors, and the two run drivers:
//!
//! * [`hybrid::run_pso`] runs plain PSO until a stopping criterion trips.
//! * [`hybrid::run_llm_pso`] runs a few PSO iterations, then periodically
//!   asks an [`advisor::AdvisorBackend`] for `npop` candidate positions,
//!   evaluates them as one batch and swaps them in for the worst particles.
//!
//! Anything that touches processes, sockets or files lives in the `llm-pso`
//! companion crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod advisor;
pub mod error;
pub mod grid;
pub mod hybrid;
pub mod objective;
pub mod prompt;
pub mod space;
pub mod swarm;

pub use advisor::{
    heuristic_mock_suggest, suggest, AdvisorBackend, AdvisorExchange, AdvisorInfo, MockAdvisor,
    ScriptedAdvisor, Suggestion,
};
pub use error::{AdvisorError, BatchError, ConfigError, ObjectiveError, RunError, StepError};
pub use grid::{eval_grid, GridMinimum};
pub use hybrid::{
    check_convergence, inject_suggestions, run_llm_pso, run_pso, Decision, Degradation, FailurePolicy,
    InjectionRecord, Progress, RunConfig, RunMetadata, RunReport, StopReason, StoppingCriterion,
    TrajectoryPoint, BOUNDARY_POLICY,
};
pub use objective::{rastrigin, synthetic_landscape, Counted, Objective, Rastrigin, SyntheticLandscape};
pub use prompt::{build_prompt, parse_response, render_suggestions, SwarmSnapshot};
pub use space::{Axis, SearchSpace};
pub use swarm::{
    initialize_swarm, update_position, update_velocity, CoefficientConfig, Particle, RandomDraws,
    StepReport, Swarm, SwarmConfig,
};

/// Deterministic generator used for every random stream in a run.
pub type SwarmRng = rand_chacha::ChaCha8Rng;

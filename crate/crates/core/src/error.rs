use alloc::string::String;
use core::fmt;

/// Rejected configuration: swarm, search space or run settings.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    EmptySwarm,
    EmptySpace,
    InvalidAxis { axis: String, reason: &'static str },
    InvalidCoefficients(&'static str),
    InvalidRun(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::EmptySwarm => f.write_str("population size must be at least 1"),
            ConfigError::EmptySpace => f.write_str("search space has no axes"),
            ConfigError::InvalidAxis { axis, reason } => write!(f, "axis `{axis}`: {reason}"),
            ConfigError::InvalidCoefficients(reason) => write!(f, "coefficients: {reason}"),
            ConfigError::InvalidRun(reason) => write!(f, "run config: {reason}"),
        }
    }
}

impl core::error::Error for ConfigError {}

/// Failure while evaluating one candidate.
#[derive(Debug, Clone, PartialEq)]
pub enum ObjectiveError {
    /// Candidate lies outside the function's domain.
    Domain { axis: usize, value: f64 },
    /// Candidate has the wrong number of coordinates.
    Dimension { expected: usize, got: usize },
    /// Objective produced NaN or an infinity.
    NonFinite { value: f64 },
    /// Evaluator answered with something that does not follow the protocol.
    Protocol { message: String, raw: String },
    /// Timeout, dead child process, transport failure.
    Evaluation(String),
}

impl fmt::Display for ObjectiveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObjectiveError::Domain { axis, value } => {
                write!(f, "coordinate {axis} = {value} is outside the objective's domain")
            }
            ObjectiveError::Dimension { expected, got } => {
                write!(f, "expected {expected} coordinates, got {got}")
            }
            ObjectiveError::NonFinite { value } => write!(f, "non-finite cost {value}"),
            ObjectiveError::Protocol { message, raw } => {
                write!(f, "protocol error: {message} (payload: {raw:?})")
            }
            ObjectiveError::Evaluation(msg) => write!(f, "evaluation failed: {msg}"),
        }
    }
}

impl core::error::Error for ObjectiveError {}

/// Failure of one candidate inside a batch, tagged with its position.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchError {
    pub index: usize,
    pub source: ObjectiveError,
}

impl fmt::Display for BatchError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "candidate {}: {}", self.index, self.source)
    }
}

impl core::error::Error for BatchError {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        Some(&self.source)
    }
}

/// A swarm step was aborted; the swarm has been restored to its pre-step state.
#[derive(Debug, Clone, PartialEq)]
pub struct StepError {
    pub particle: usize,
    pub source: ObjectiveError,
}

impl From<BatchError> for StepError {
    fn from(e: BatchError) -> Self {
        StepError {
            particle: e.index,
            source: e.source,
        }
    }
}

impl fmt::Display for StepError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "particle {}: {}", self.particle, self.source)
    }
}

impl core::error::Error for StepError {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        Some(&self.source)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AdvisorError {
    /// The backend could not be reached or returned no usable body.
    Transport(String),
    /// A response arrived but its envelope was malformed.
    Protocol { message: String, raw: String },
    /// The response text could not be turned into `npop` suggestions.
    Parse { message: String, raw: String },
    /// Snapshot does not fit the prompt template.
    Snapshot(String),
}

impl fmt::Display for AdvisorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdvisorError::Transport(msg) => write!(f, "advisor transport: {msg}"),
            AdvisorError::Protocol { message, raw } => {
                write!(f, "advisor protocol: {message} (raw: {raw:?})")
            }
            AdvisorError::Parse { message, raw } => {
                write!(f, "advisor response unparseable: {message} (raw: {raw:?})")
            }
            AdvisorError::Snapshot(msg) => write!(f, "snapshot: {msg}"),
        }
    }
}

impl core::error::Error for AdvisorError {}

/// Error surfaced by the run drivers, with enough context to locate it.
#[derive(Debug, Clone, PartialEq)]
pub enum RunError {
    Config(ConfigError),
    /// Evaluation failed. `particle` is the index inside the failing batch:
    /// a swarm particle, or a suggestion when `during_injection` is set.
    Objective {
        iteration: usize,
        particle: usize,
        during_injection: bool,
        source: ObjectiveError,
    },
    Advisor { iteration: usize, source: AdvisorError },
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Objective {
                iteration,
                particle,
                during_injection,
                source,
            } => {
                let what = if *during_injection { "suggestion" } else { "particle" };
                write!(f, "iteration {iteration}, {what} {particle}: {source}")
            }
            RunError::Advisor { iteration, source } => {
                write!(f, "iteration {iteration}: {source}")
            }
        }
    }
}

impl core::error::Error for RunError {}

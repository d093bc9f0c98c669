//! Run drivers: plain PSO and advisor-guided PSO.
//!
//! Accounting follows one rule: a *model call* is one objective evaluation
//! after initialization. Plain PSO spends `pop_size` calls per iteration;
//! every evaluated advisor consult spends another `pop_size`. The initial
//! evaluation of the random swarm is reported separately as
//! `init_evaluations`.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::advisor::{suggest, AdvisorBackend, AdvisorExchange, AdvisorInfo, Suggestion, DEFAULT_RETRY_LIMIT};
use crate::error::{ConfigError, RunError, StepError};
use crate::objective::Objective;
use crate::prompt::SwarmSnapshot;
use crate::swarm::{evaluate_checked, initialize_swarm, CoefficientConfig, RandomDraws, Swarm, SwarmConfig};
use crate::SwarmRng;

/// Boundary handling recorded in every report.
pub const BOUNDARY_POLICY: &str = "clip-keep-velocity";

/// Population sizes used in the reference experiments; others work but are
/// reported by [`RunConfig::warnings`].
pub const REFERENCE_POP_SIZES: [usize; 6] = [5, 10, 15, 20, 50, 100];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingCriterion {
    /// Converged once `gbest_cost <= target_cost + epsilon`.
    pub target_cost: Option<f64>,
    #[serde(default)]
    pub epsilon: f64,
    /// Give up after this many consecutive PSO iterations without a gbest
    /// improvement.
    pub stagnation_window: Option<usize>,
    /// Budget of PSO iterations (advisor consults are not counted here).
    pub max_iterations: usize,
}

impl StoppingCriterion {
    pub fn max_iterations(max_iterations: usize) -> Self {
        StoppingCriterion {
            target_cost: None,
            epsilon: 0.0,
            stagnation_window: None,
            max_iterations,
        }
    }

    pub fn with_target(mut self, target_cost: f64, epsilon: f64) -> Self {
        self.target_cost = Some(target_cost);
        self.epsilon = epsilon;
        self
    }

    pub fn with_stagnation(mut self, window: usize) -> Self {
        self.stagnation_window = Some(window);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    Continue,
    Converged,
    Exhausted,
}

/// What [`check_convergence`] looks at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Progress {
    pub iteration: usize,
    pub gbest_cost: f64,
    /// Consecutive PSO iterations without a gbest improvement.
    pub stagnant_iterations: usize,
}

pub fn check_convergence(progress: &Progress, criterion: &StoppingCriterion) -> Decision {
    if let Some(target) = criterion.target_cost {
        if progress.gbest_cost <= target + criterion.epsilon {
            return Decision::Converged;
        }
    }
    if progress.iteration >= criterion.max_iterations {
        return Decision::Exhausted;
    }
    if let Some(window) = criterion.stagnation_window {
        if progress.stagnant_iterations >= window {
            return Decision::Exhausted;
        }
    }
    Decision::Continue
}

/// What to do when the advisor cannot be reached.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailurePolicy {
    Abort,
    /// Carry on as plain PSO for the rest of the run.
    #[default]
    Degrade,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub pop_size: usize,
    /// Plain PSO iterations before the first consult.
    pub initial_pso_iterations: usize,
    /// PSO iterations between later consults.
    pub consult_period: usize,
    pub coefficients: CoefficientConfig,
    #[serde(default)]
    pub random_draws: RandomDraws,
    pub stop: StoppingCriterion,
    pub seed: u64,
    /// Cap on particles replaced per consult.
    #[serde(default)]
    pub replace_k: Option<usize>,
    pub retry_limit: usize,
    #[serde(default)]
    pub on_advisor_failure: FailurePolicy,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            pop_size: 5,
            initial_pso_iterations: 2,
            consult_period: 2,
            coefficients: CoefficientConfig::default(),
            random_draws: RandomDraws::default(),
            stop: StoppingCriterion::max_iterations(10),
            seed: 0,
            replace_k: None,
            retry_limit: DEFAULT_RETRY_LIMIT,
            on_advisor_failure: FailurePolicy::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.pop_size == 0 {
            return Err(ConfigError::EmptySwarm);
        }
        self.coefficients.validate()?;
        if self.stop.max_iterations == 0 {
            return Err(ConfigError::InvalidRun("max_iterations must be at least 1".into()));
        }
        if let Some(t) = self.stop.target_cost {
            if !t.is_finite() || !self.stop.epsilon.is_finite() || self.stop.epsilon < 0.0 {
                return Err(ConfigError::InvalidRun("target cost and epsilon must be finite, epsilon >= 0".into()));
            }
        }
        if self.stop.stagnation_window == Some(0) {
            return Err(ConfigError::InvalidRun("stagnation window must be at least 1".into()));
        }
        Ok(())
    }

    fn validate_hybrid(&self) -> Result<(), ConfigError> {
        self.validate()?;
        if self.initial_pso_iterations == 0 || self.initial_pso_iterations > self.stop.max_iterations {
            return Err(ConfigError::InvalidRun(alloc::format!(
                "initial PSO iterations must be in 1..={}, got {}",
                self.stop.max_iterations,
                self.initial_pso_iterations
            )));
        }
        if self.consult_period == 0 {
            return Err(ConfigError::InvalidRun("consult period must be at least 1".into()));
        }
        if self.replace_k == Some(0) {
            return Err(ConfigError::InvalidRun("replace_k must be at least 1".into()));
        }
        Ok(())
    }

    /// Non-fatal remarks about the configuration.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !REFERENCE_POP_SIZES.contains(&self.pop_size) {
            out.push(alloc::format!(
                "population size {} is outside the reference set {:?}",
                self.pop_size, REFERENCE_POP_SIZES
            ));
        }
        out
    }

    fn swarm_config(&self) -> SwarmConfig {
        SwarmConfig {
            pop_size: self.pop_size,
            coefficients: self.coefficients,
            random_draws: self.random_draws,
        }
    }
}

/// One replacement of worst particles by advisor suggestions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionRecord {
    pub iteration: usize,
    pub replaced_indices: Vec<usize>,
    /// Cost of every evaluated suggestion, in suggestion order.
    pub suggestion_costs: Vec<f64>,
    pub gbest_before: f64,
    pub gbest_after: f64,
}

/// Replace the worst particles by the best suggestions.
///
/// Particles are ranked worst-first by current cost and suggestions
/// best-first by cost; the i-th suggestion replaces the i-th worst particle
/// while it is strictly better, stopping at the first pair that is not (or
/// after `replace_k` replacements). A replaced particle takes the
/// suggestion's position, its velocity (or a fresh uniform one when the
/// suggestion carries none) and restarts its pbest there.
pub fn inject_suggestions<R: Rng + ?Sized>(
    swarm: &mut Swarm,
    evaluated: &[(Suggestion, f64)],
    replace_k: Option<usize>,
    rng: &mut R,
) -> InjectionRecord {
    let gbest_before = swarm.gbest_cost();
    let mut worst_first: Vec<usize> = (0..swarm.pop_size()).collect();
    worst_first.sort_by(|&a, &b| {
        let (ca, cb) = (swarm.particles[a].current_cost, swarm.particles[b].current_cost);
        cb.total_cmp(&ca)
    });
    let mut best_first: Vec<usize> = (0..evaluated.len()).collect();
    best_first.sort_by(|&a, &b| evaluated[a].1.total_cmp(&evaluated[b].1));

    let limit = replace_k.unwrap_or(usize::MAX);
    let mut replaced = Vec::new();
    for (&pi, &si) in worst_first.iter().zip(&best_first) {
        let (suggestion, cost) = &evaluated[si];
        if replaced.len() >= limit || *cost >= swarm.particles[pi].current_cost {
            break;
        }
        let space = swarm.space().clone();
        let velocity = match &suggestion.velocity {
            Some(v) => {
                let mut v = v.clone();
                space.clamp_velocity(&mut v);
                v
            }
            None => space
                .axes
                .iter()
                .map(|a| rng.random_range(-a.v_max..=a.v_max))
                .collect(),
        };
        swarm.replace_particle(pi, space.evaluation_point(&suggestion.position), velocity, *cost);
        replaced.push(pi);
    }

    InjectionRecord {
        iteration: swarm.iteration(),
        replaced_indices: replaced,
        suggestion_costs: evaluated.iter().map(|(_, c)| *c).collect(),
        gbest_before,
        gbest_after: swarm.gbest_cost(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub iteration: usize,
    pub cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Converged,
    MaxIterations,
    Stagnation,
}

/// The advisor stopped answering and the run continued as plain PSO.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Degradation {
    pub iteration: usize,
    pub error: String,
}

/// Settings a report was produced with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub config: RunConfig,
    pub boundary_policy: String,
    pub hybrid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// gbest after initialization, after every PSO iteration and after
    /// every injection.
    pub gbest_trajectory: Vec<TrajectoryPoint>,
    pub axis_names: Vec<String>,
    /// Evaluated (rounded) coordinates of the best point found.
    pub global_best_position: Vec<f64>,
    pub global_best_cost: f64,
    /// Evaluations after initialization, suggestions included.
    pub model_calls: usize,
    pub init_evaluations: usize,
    /// Consults whose suggestions were evaluated.
    pub consults: usize,
    pub advisor_exchanges: Vec<AdvisorExchange>,
    pub injections: Vec<InjectionRecord>,
    pub converged: bool,
    pub stop_reason: StopReason,
    /// PSO iterations executed.
    pub iterations_used: usize,
    pub degraded: Option<Degradation>,
    pub advisor: Option<AdvisorInfo>,
    pub metadata: RunMetadata,
}

impl RunReport {
    /// Best coordinate on the named axis, e.g. `"layers"` or `"neurons"`.
    pub fn best_coordinate(&self, axis: &str) -> Option<f64> {
        let i = self.axis_names.iter().position(|n| n == axis)?;
        self.global_best_position.get(i).copied()
    }
}

struct Driver<'a, O: ?Sized> {
    config: &'a RunConfig,
    objective: &'a O,
    swarm: Swarm,
    advisor_rng: SwarmRng,
    stagnant: usize,
    report: RunReport,
}

impl<'a, O: Objective + ?Sized> Driver<'a, O> {
    fn start(config: &'a RunConfig, objective: &'a O, hybrid: bool) -> Result<Self, RunError> {
        let space = objective.space();
        let mut swarm = initialize_swarm(&config.swarm_config(), space, config.seed)?;
        swarm
            .evaluate_initial(objective)
            .map_err(|e| step_error(0, e))?;
        let mut advisor_rng = SwarmRng::seed_from_u64(config.seed);
        advisor_rng.set_stream(1);

        let report = RunReport {
            gbest_trajectory: alloc::vec![TrajectoryPoint {
                iteration: 0,
                cost: swarm.gbest_cost(),
            }],
            axis_names: space.axes.iter().map(|a| a.name.clone()).collect(),
            global_best_position: Vec::new(),
            global_best_cost: f64::INFINITY,
            model_calls: 0,
            init_evaluations: config.pop_size,
            consults: 0,
            advisor_exchanges: Vec::new(),
            injections: Vec::new(),
            converged: false,
            stop_reason: StopReason::MaxIterations,
            iterations_used: 0,
            degraded: None,
            advisor: None,
            metadata: RunMetadata {
                config: config.clone(),
                boundary_policy: BOUNDARY_POLICY.to_string(),
                hybrid,
            },
        };
        Ok(Driver {
            config,
            objective,
            swarm,
            advisor_rng,
            stagnant: 0,
            report,
        })
    }

    fn progress(&self) -> Progress {
        Progress {
            iteration: self.swarm.iteration(),
            gbest_cost: self.swarm.gbest_cost(),
            stagnant_iterations: self.stagnant,
        }
    }

    fn consult_due(&self) -> bool {
        let t = self.swarm.iteration();
        t >= self.config.initial_pso_iterations
            && (t - self.config.initial_pso_iterations).is_multiple_of(self.config.consult_period)
    }

    fn run(mut self, mut advisor: Option<&mut dyn AdvisorBackend>) -> Result<RunReport, RunError> {
        if let Some(a) = advisor.as_deref() {
            self.report.advisor = Some(a.info());
        }
        loop {
            match check_convergence(&self.progress(), &self.config.stop) {
                Decision::Converged => {
                    self.report.converged = true;
                    self.report.stop_reason = StopReason::Converged;
                    break;
                }
                Decision::Exhausted => {
                    self.report.stop_reason = if self.swarm.iteration() >= self.config.stop.max_iterations {
                        StopReason::MaxIterations
                    } else {
                        StopReason::Stagnation
                    };
                    break;
                }
                Decision::Continue => {}
            }

            if advisor.is_some() && self.consult_due() {
                let backend = advisor.as_deref_mut().expect("checked above");
                if !self.consult(backend)? {
                    advisor = None;
                }
                if check_convergence(&self.progress(), &self.config.stop) == Decision::Converged {
                    continue;
                }
            }

            let t = self.swarm.iteration();
            let step = self.swarm.step(self.objective).map_err(|e| step_error(t, e))?;
            self.report.model_calls += step.evaluations;
            self.stagnant = if step.improved { 0 } else { self.stagnant + 1 };
            self.push_point();
        }
        self.finish()
    }

    /// Returns `false` when the advisor failed and the run degrades.
    fn consult(&mut self, backend: &mut dyn AdvisorBackend) -> Result<bool, RunError> {
        let t = self.swarm.iteration();
        let snapshot = SwarmSnapshot::from_swarm(&self.swarm);
        let mut exchange = match suggest(backend, &snapshot, self.config.retry_limit, &mut self.advisor_rng) {
            Ok(ex) => ex,
            Err(source) => {
                return match self.config.on_advisor_failure {
                    FailurePolicy::Abort => Err(RunError::Advisor { iteration: t, source }),
                    FailurePolicy::Degrade => {
                        self.report.degraded = Some(Degradation {
                            iteration: t,
                            error: source.to_string(),
                        });
                        Ok(false)
                    }
                };
            }
        };
        exchange.iteration = t;

        let candidates: Vec<Vec<f64>> = exchange
            .parsed
            .iter()
            .map(|s| self.swarm.space().evaluation_point(&s.position))
            .collect();
        let costs = evaluate_checked(self.objective, &candidates).map_err(|e| RunError::Objective {
            iteration: t,
            particle: e.index,
            during_injection: true,
            source: e.source,
        })?;
        self.report.model_calls += costs.len();
        self.report.consults += 1;

        let evaluated: Vec<(Suggestion, f64)> = exchange.parsed.iter().cloned().zip(costs).collect();
        let record = inject_suggestions(&mut self.swarm, &evaluated, self.config.replace_k, &mut self.advisor_rng);
        if record.gbest_after < record.gbest_before {
            self.stagnant = 0;
        }
        self.push_point();
        self.report.injections.push(record);
        self.report.advisor_exchanges.push(exchange);
        Ok(true)
    }

    fn push_point(&mut self) {
        self.report.gbest_trajectory.push(TrajectoryPoint {
            iteration: self.swarm.iteration(),
            cost: self.swarm.gbest_cost(),
        });
    }

    fn finish(mut self) -> Result<RunReport, RunError> {
        self.report.iterations_used = self.swarm.iteration();
        self.report.global_best_cost = self.swarm.gbest_cost();
        self.report.global_best_position = self.swarm.space().evaluation_point(self.swarm.gbest_position());
        Ok(self.report)
    }
}

fn step_error(iteration: usize, e: StepError) -> RunError {
    RunError::Objective {
        iteration,
        particle: e.particle,
        during_injection: false,
        source: e.source,
    }
}

/// Plain PSO: initialize, evaluate, then step until the stopping criterion
/// trips.
pub fn run_pso<O: Objective + ?Sized>(config: &RunConfig, objective: &O) -> Result<RunReport, RunError> {
    config.validate()?;
    Driver::start(config, objective, false)?.run(None)
}

/// Advisor-guided PSO.
///
/// Runs `initial_pso_iterations` plain iterations, then consults the
/// advisor, evaluates its `pop_size` suggestions as one batch and injects
/// them, and repeats the consult every `consult_period` iterations until
/// the stopping criterion trips.
pub fn run_llm_pso<O: Objective + ?Sized, B: AdvisorBackend + ?Sized>(
    config: &RunConfig,
    objective: &O,
    advisor: &mut B,
) -> Result<RunReport, RunError> {
    config.validate_hybrid()?;
    if objective.space().dims() != 2 {
        return Err(ConfigError::InvalidRun(alloc::format!(
            "advisor prompt needs a 2-axis space, objective has {}",
            objective.space().dims()
        ))
        .into());
    }
    let mut dynamic = DynAdvisor(advisor);
    Driver::start(config, objective, true)?.run(Some(&mut dynamic))
}

struct DynAdvisor<'a, B: ?Sized>(&'a mut B);

impl<B: AdvisorBackend + ?Sized> AdvisorBackend for DynAdvisor<'_, B> {
    fn info(&self) -> AdvisorInfo {
        self.0.info()
    }
    fn complete(&mut self, prompt: &str, snapshot: &SwarmSnapshot) -> Result<String, crate::AdvisorError> {
        self.0.complete(prompt, snapshot)
    }
}

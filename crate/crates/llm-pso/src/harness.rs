//! Repeated seeded trials over a sweep grid.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Duration;

use llm_pso_core::{
    eval_grid, run_llm_pso, run_pso, AdvisorBackend, MockAdvisor, Objective, Rastrigin, RunConfig, RunReport,
    SearchSpace, SyntheticLandscape, BOUNDARY_POLICY,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::advisor::{load_transcript, AuditLog, Audited, HttpAdvisor, DEFAULT_MODEL, DEFAULT_TEMPERATURE};
use crate::error::{Error, Result};
use crate::external::{ExternalConfig, HttpObjective, ProcessObjective};
use crate::parallel::Parallel;
use crate::stats::{summarize, TrialStatistics};

pub type DynObjective = Box<dyn Objective + Send + Sync>;
pub type DynAdvisor = Box<dyn AdvisorBackend + Send>;

/// `rastrigin`, `synthetic`, `ext-proc:<cmd>` or `ext-http:<url>`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ObjectiveSpec {
    #[default]
    Rastrigin,
    Synthetic,
    Process(String),
    Http(String),
}

impl ObjectiveSpec {
    /// In-repo objectives: deterministic and safe to run concurrently.
    pub fn is_pure(&self) -> bool {
        matches!(self, ObjectiveSpec::Rastrigin | ObjectiveSpec::Synthetic)
    }

    pub fn default_space(&self) -> SearchSpace {
        match self {
            ObjectiveSpec::Rastrigin => SearchSpace::rastrigin(2),
            _ => SearchSpace::neurons_layers(),
        }
    }

    /// Start a fresh handle. `space` only applies to external objectives.
    pub fn build(&self, space: Option<&SearchSpace>, external: &ExternalConfig) -> Result<DynObjective> {
        let space = space.cloned().unwrap_or_else(|| self.default_space());
        Ok(match self {
            ObjectiveSpec::Rastrigin => Box::new(Rastrigin::new(2)),
            ObjectiveSpec::Synthetic => Box::new(SyntheticLandscape::default()),
            ObjectiveSpec::Process(cmd) => Box::new(
                ProcessObjective::spawn(cmd, space, external.clone())
                    .map_err(|e| Error::Config(format!("cannot launch `{cmd}`: {e}")))?,
            ),
            ObjectiveSpec::Http(url) => Box::new(Parallel(HttpObjective::new(url, space, external.clone()))),
        })
    }
}

impl FromStr for ObjectiveSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(cmd) = s.strip_prefix("ext-proc:") {
            if cmd.trim().is_empty() {
                return Err(Error::Config("ext-proc needs a command".into()));
            }
            return Ok(ObjectiveSpec::Process(cmd.to_string()));
        }
        if let Some(url) = s.strip_prefix("ext-http:") {
            if url.trim().is_empty() {
                return Err(Error::Config("ext-http needs a URL".into()));
            }
            return Ok(ObjectiveSpec::Http(url.to_string()));
        }
        match s {
            "rastrigin" => Ok(ObjectiveSpec::Rastrigin),
            "synthetic" => Ok(ObjectiveSpec::Synthetic),
            other => Err(Error::Config(format!(
                "unknown objective `{other}` (expected rastrigin, synthetic, ext-proc:<cmd> or ext-http:<url>)"
            ))),
        }
    }
}

impl fmt::Display for ObjectiveSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObjectiveSpec::Rastrigin => f.write_str("rastrigin"),
            ObjectiveSpec::Synthetic => f.write_str("synthetic"),
            ObjectiveSpec::Process(cmd) => write!(f, "ext-proc:{cmd}"),
            ObjectiveSpec::Http(url) => write!(f, "ext-http:{url}"),
        }
    }
}

impl TryFrom<String> for ObjectiveSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ObjectiveSpec> for String {
    fn from(s: ObjectiveSpec) -> String {
        s.to_string()
    }
}

/// `mock`, `mock-oracle`, `scripted:<file>` or `http:<url>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum AdvisorSpec {
    Mock,
    MockOracle,
    Scripted(PathBuf),
    Http(String),
}

impl FromStr for AdvisorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(path) = s.strip_prefix("scripted:") {
            return Ok(AdvisorSpec::Scripted(PathBuf::from(path)));
        }
        if let Some(url) = s.strip_prefix("http:") {
            // accept both `http:<url>` and a bare `http://host`
            let url = if url.starts_with("//") { s.to_string() } else { url.to_string() };
            return Ok(AdvisorSpec::Http(url));
        }
        if s.starts_with("https://") {
            return Ok(AdvisorSpec::Http(s.to_string()));
        }
        match s {
            "mock" => Ok(AdvisorSpec::Mock),
            "mock-oracle" => Ok(AdvisorSpec::MockOracle),
            other => Err(Error::Config(format!(
                "unknown advisor `{other}` (expected mock, mock-oracle, scripted:<file> or http:<url>)"
            ))),
        }
    }
}

impl fmt::Display for AdvisorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdvisorSpec::Mock => f.write_str("mock"),
            AdvisorSpec::MockOracle => f.write_str("mock-oracle"),
            AdvisorSpec::Scripted(p) => write!(f, "scripted:{}", p.display()),
            AdvisorSpec::Http(url) => write!(f, "http:{url}"),
        }
    }
}

impl TryFrom<String> for AdvisorSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<AdvisorSpec> for String {
    fn from(s: AdvisorSpec) -> String {
        s.to_string()
    }
}

/// Values to sweep; an empty list keeps the base value.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Sweep {
    pub pop_size: Vec<usize>,
    pub c1: Vec<f64>,
    pub c2: Vec<f64>,
    pub initial_pso_iterations: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub pop_size: usize,
    pub c1: f64,
    pub c2: f64,
    pub initial_pso_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub base: RunConfig,
    pub objective: ObjectiveSpec,
    pub advisor: Option<AdvisorSpec>,
    pub model: String,
    pub temperature: f64,
    pub advisor_timeout_ms: u64,
    pub external: ExternalConfig,
    /// Search space for external objectives (default: neurons x layers).
    pub space: Option<SearchSpace>,
    pub repeats: usize,
    pub seed_base: u64,
    pub sweep: Sweep,
    /// Also run plain PSO on every hybrid seed and report call deltas.
    pub paired: bool,
    pub audit: Option<PathBuf>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            base: RunConfig::default(),
            objective: ObjectiveSpec::default(),
            advisor: None,
            model: DEFAULT_MODEL.to_string(),
            temperature: DEFAULT_TEMPERATURE,
            advisor_timeout_ms: 60_000,
            external: ExternalConfig::default(),
            space: None,
            repeats: 1,
            seed_base: 0,
            sweep: Sweep::default(),
            paired: false,
            audit: None,
        }
    }
}

impl ExperimentSpec {
    /// Cross product of the sweep lists, pop size varying slowest.
    pub fn cells(&self) -> Vec<Cell> {
        fn or<T: Copy>(list: &[T], base: T) -> Vec<T> {
            if list.is_empty() {
                vec![base]
            } else {
                list.to_vec()
            }
        }
        let b = &self.base;
        let mut out = Vec::new();
        for &pop_size in &or(&self.sweep.pop_size, b.pop_size) {
            for &c1 in &or(&self.sweep.c1, b.coefficients.c1) {
                for &c2 in &or(&self.sweep.c2, b.coefficients.c2) {
                    for &initial in &or(&self.sweep.initial_pso_iterations, b.initial_pso_iterations) {
                        out.push(Cell {
                            pop_size,
                            c1,
                            c2,
                            initial_pso_iterations: initial,
                        });
                    }
                }
            }
        }
        out
    }

    pub fn cell_config(&self, cell: &Cell, seed: u64) -> RunConfig {
        let mut config = self.base.clone();
        config.pop_size = cell.pop_size;
        config.coefficients.c1 = cell.c1;
        config.coefficients.c2 = cell.c2;
        config.initial_pso_iterations = cell.initial_pso_iterations;
        config.seed = seed;
        config
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        if self.space.is_some() && self.objective.is_pure() {
            return Err(Error::Config(format!("a custom space only applies to external objectives, not {}", self.objective)));
        }
        if let Some(space) = &self.space {
            space.validate()?;
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(Error::Config("temperature must be a non-negative number".into()));
        }
        for cell in self.cells() {
            let config = self.cell_config(&cell, self.seed_base);
            config.validate()?;
            if self.advisor.is_some() {
                if config.initial_pso_iterations == 0 || config.initial_pso_iterations > config.stop.max_iterations {
                    return Err(Error::Config(format!(
                        "initial iterations {} must be in 1..={}",
                        config.initial_pso_iterations, config.stop.max_iterations
                    )));
                }
                if config.consult_period == 0 {
                    return Err(Error::Config("consult period must be at least 1".into()));
                }
            }
        }
        if self.paired && self.advisor.is_none() {
            return Err(Error::Config("paired comparison needs an advisor".into()));
        }
        Ok(())
    }

    fn seed(&self, trial: usize) -> u64 {
        self.seed_base.wrapping_add(trial as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub report: Option<RunReport>,
    pub error: Option<String>,
    /// Plain PSO on the same seed, in paired mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<Box<TrialRecord>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedComparison {
    pub seeds: Vec<u64>,
    pub hybrid_calls: Vec<usize>,
    pub baseline_calls: Vec<usize>,
    /// hybrid minus baseline, per seed.
    pub deltas: Vec<i64>,
    pub delta_stats: Option<TrialStatistics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: Cell,
    pub trials: Vec<TrialRecord>,
    /// Over converged runs only.
    pub iterations: Option<TrialStatistics>,
    pub model_calls: Option<TrialStatistics>,
    pub final_cost: Option<TrialStatistics>,
    pub converged_runs: usize,
    /// Finished without reaching the target; left out of `iterations`.
    pub non_converged_runs: usize,
    pub failed_runs: usize,
    pub paired: Option<PairedComparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResults {
    pub spec: ExperimentSpec,
    pub boundary_policy: String,
    pub cells: Vec<CellResult>,
    pub warnings: Vec<String>,
}

impl ExperimentResults {
    pub fn failed_runs(&self) -> usize {
        self.cells.iter().map(|c| c.failed_runs).sum()
    }
}

/// Where the oracle mock should point, found once per experiment.
fn oracle_optimum(spec: &ExperimentSpec) -> Result<Vec<f64>> {
    if spec.objective == ObjectiveSpec::Rastrigin {
        return Ok(vec![0.0; 2]);
    }
    let objective = spec.objective.build(spec.space.as_ref(), &spec.external)?;
    if !objective.space().is_integral() {
        return Err(Error::Config("mock-oracle needs an integer search space to scan".into()));
    }
    Ok(eval_grid(&objective)?.position)
}

struct Context {
    oracle: Option<Vec<f64>>,
    audit: Option<AuditLog>,
}

fn build_advisor(spec: &ExperimentSpec, ctx: &Context, seed: u64, run: String) -> Result<DynAdvisor> {
    let advisor = spec.advisor.as_ref().expect("hybrid trial has an advisor");
    let backend: DynAdvisor = match advisor {
        AdvisorSpec::Mock => Box::new(MockAdvisor::new(seed)),
        AdvisorSpec::MockOracle => Box::new(MockAdvisor::oracle(
            seed,
            ctx.oracle.clone().expect("oracle optimum computed up front"),
        )),
        AdvisorSpec::Scripted(path) => Box::new(load_transcript(path)?),
        AdvisorSpec::Http(url) => Box::new(HttpAdvisor::new(
            url,
            &spec.model,
            spec.temperature,
            Duration::from_millis(spec.advisor_timeout_ms),
        )),
    };
    Ok(match &ctx.audit {
        Some(log) => Box::new(Audited::new(backend, log.clone(), run)),
        None => backend,
    })
}

fn record(seed: u64, outcome: Result<RunReport>) -> TrialRecord {
    match outcome {
        Ok(report) => TrialRecord {
            seed,
            report: Some(report),
            error: None,
            baseline: None,
        },
        Err(e) => {
            log::error!("seed {seed}: {e}");
            TrialRecord {
                seed,
                report: None,
                error: Some(e.to_string()),
                baseline: None,
            }
        }
    }
}

fn run_one(spec: &ExperimentSpec, ctx: &Context, cell_index: usize, cell: &Cell, trial: usize) -> TrialRecord {
    let seed = spec.seed(trial);
    let config = spec.cell_config(cell, seed);
    let hybrid = spec.advisor.is_some();
    let outcome = spec
        .objective
        .build(spec.space.as_ref(), &spec.external)
        .and_then(|objective| {
            if hybrid {
                let mut advisor = build_advisor(spec, ctx, seed, format!("cell{cell_index}/seed{seed}"))?;
                Ok(run_llm_pso(&config, &objective, &mut advisor)?)
            } else {
                Ok(run_pso(&config, &objective)?)
            }
        });
    let mut rec = record(seed, outcome);
    if spec.paired {
        let baseline = spec
            .objective
            .build(spec.space.as_ref(), &spec.external)
            .and_then(|objective| Ok(run_pso(&config, &objective)?));
        rec.baseline = Some(Box::new(record(seed, baseline)));
    }
    rec
}

fn stats(samples: &[f64]) -> Option<TrialStatistics> {
    // samples come from finished runs, so they are finite
    summarize(samples).ok()
}

fn aggregate(cell: Cell, trials: Vec<TrialRecord>, paired: bool) -> CellResult {
    let reports: Vec<&RunReport> = trials.iter().filter_map(|t| t.report.as_ref()).collect();
    let converged: Vec<f64> = reports
        .iter()
        .filter(|r| r.converged)
        .map(|r| r.iterations_used as f64)
        .collect();
    let calls: Vec<f64> = reports.iter().map(|r| r.model_calls as f64).collect();
    let costs: Vec<f64> = reports.iter().map(|r| r.global_best_cost).collect();

    let paired = paired.then(|| {
        let mut cmp = PairedComparison {
            seeds: Vec::new(),
            hybrid_calls: Vec::new(),
            baseline_calls: Vec::new(),
            deltas: Vec::new(),
            delta_stats: None,
        };
        for t in &trials {
            let base = t.baseline.as_ref().and_then(|b| b.report.as_ref());
            if let (Some(h), Some(b)) = (&t.report, base) {
                cmp.seeds.push(t.seed);
                cmp.hybrid_calls.push(h.model_calls);
                cmp.baseline_calls.push(b.model_calls);
                cmp.deltas.push(h.model_calls as i64 - b.model_calls as i64);
            }
        }
        let d: Vec<f64> = cmp.deltas.iter().map(|&x| x as f64).collect();
        cmp.delta_stats = stats(&d);
        cmp
    });

    CellResult {
        cell,
        iterations: stats(&converged),
        model_calls: stats(&calls),
        final_cost: stats(&costs),
        converged_runs: converged.len(),
        non_converged_runs: reports.len() - converged.len(),
        failed_runs: trials.len() - reports.len(),
        trials,
        paired,
    }
}

/// Run `repeats` trials per sweep cell, seeds `seed_base + trial`.
///
/// Trials of in-repo objectives run on the rayon pool; results are merged
/// in (cell, trial) order so output does not depend on scheduling.
pub fn run_trials(spec: &ExperimentSpec) -> Result<ExperimentResults> {
    spec.validate()?;
    let cells = spec.cells();
    let oracle = match spec.advisor {
        Some(AdvisorSpec::MockOracle) => Some(oracle_optimum(spec)?),
        _ => None,
    };
    if let Some(AdvisorSpec::Scripted(path)) = &spec.advisor {
        // fail early on a missing transcript
        load_transcript(path).map_err(|e| Error::Config(e.to_string()))?;
    }
    let audit = spec.audit.as_deref().map(AuditLog::open).transpose()?;
    let ctx = Context { oracle, audit };

    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..spec.repeats).map(move |t| (c, t)))
        .collect();
    let concurrent = spec.objective.is_pure() && !matches!(spec.advisor, Some(AdvisorSpec::Http(_)));
    let run = |&(c, t): &(usize, usize)| run_one(spec, &ctx, c, &cells[c], t);
    let mut records: Vec<TrialRecord> = if concurrent {
        jobs.par_iter().map(run).collect()
    } else {
        jobs.iter().map(run).collect()
    };

    let mut warnings = Vec::new();
    let mut results = Vec::with_capacity(cells.len());
    for cell in cells.iter().rev() {
        let trials = records.split_off(records.len() - spec.repeats);
        results.push(aggregate(*cell, trials, spec.paired));
    }
    results.reverse();
    for cell in &cells {
        for w in spec.cell_config(cell, spec.seed_base).warnings() {
            if !warnings.contains(&w) {
                warnings.push(w);
            }
        }
    }
    Ok(ExperimentResults {
        spec: spec.clone(),
        boundary_policy: BOUNDARY_POLICY.to_string(),
        cells: results,
        warnings,
    })
}

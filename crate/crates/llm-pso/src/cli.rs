use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use llm_pso_core::{eval_grid, Objective, StoppingCriterion};

use crate::error::{Error, Result};
use crate::harness::{run_trials, AdvisorSpec, ExperimentResults, ExperimentSpec, ObjectiveSpec};
use crate::report::{emit_report, write_atomic, Format};

pub const RASTRIGIN_TOLERANCE: f64 = 1e-2;
pub const RASTRIGIN_MAX_ITERATIONS: usize = 500;
pub const DEFAULT_MAX_ITERATIONS: usize = 50;

#[derive(Debug, Parser)]
#[command(name = "llm-pso", version, about = "Particle swarm optimization with an optional language-model advisor")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Plain PSO trials.
    Pso(RunArgs),
    /// PSO with advisor consults.
    LlmPso(RunArgs),
    /// Sweep over comma-separated particle counts, coefficients and initial
    /// iterations, with or without an advisor.
    Sweep(RunArgs),
    /// Exhaustive scan of an integer search space.
    EvalGrid(GridArgs),
}

#[derive(Debug, Args, Default)]
pub struct RunArgs {
    /// rastrigin | synthetic | ext-proc:<cmd> | ext-http:<url>
    #[arg(long)]
    pub objective: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub particles: Vec<usize>,
    /// Maximum PSO iterations.
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long = "initial-iters", value_delimiter = ',')]
    pub initial_iters: Vec<usize>,
    #[arg(long = "consult-period")]
    pub consult_period: Option<usize>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub c1: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub c2: Vec<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub w: Option<f64>,
    /// Converged once the best cost is within this of the target.
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long = "target-cost", allow_negative_numbers = true)]
    pub target_cost: Option<f64>,
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Seed of the first trial; trial i uses seed + i.
    #[arg(long)]
    pub seed: Option<u64>,
    /// mock | mock-oracle | scripted:<file> | http:<url>
    #[arg(long)]
    pub advisor: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Append every advisor exchange to this JSON-lines file.
    #[arg(long)]
    pub audit: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_parser = ["csv", "json"])]
    pub format: Option<String>,
    /// JSON experiment file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Cap on particles replaced per consult.
    #[arg(long = "replace-k")]
    pub replace_k: Option<usize>,
    /// Stop after this many iterations without improvement.
    #[arg(long)]
    pub stagnation: Option<usize>,
    /// Run plain PSO on the same seeds and report model-call deltas.
    #[arg(long)]
    pub paired: bool,
    /// Per-request timeout for external evaluators.
    #[arg(long = "eval-timeout-ms")]
    pub eval_timeout_ms: Option<u64>,
    #[arg(long = "eval-retries")]
    pub eval_retries: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long, default_value = "synthetic")]
    pub objective: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Pso,
    Hybrid,
    Sweep,
}

/// Defaults that depend on the objective.
fn objective_defaults(spec: &mut ExperimentSpec) {
    spec.base.stop = match spec.objective {
        ObjectiveSpec::Rastrigin => {
            StoppingCriterion::max_iterations(RASTRIGIN_MAX_ITERATIONS).with_target(0.0, RASTRIGIN_TOLERANCE)
        }
        _ => StoppingCriterion::max_iterations(DEFAULT_MAX_ITERATIONS),
    };
}

fn split<T: Copy>(values: &[T], base: &mut T, sweep: &mut Vec<T>) {
    match values {
        [] => {}
        [one] => {
            *base = *one;
            sweep.clear();
        }
        many => {
            *base = many[0];
            *sweep = many.to_vec();
        }
    }
}

/// Merge config file, objective defaults and flags into one spec.
pub fn build_spec(args: &RunArgs, mode: Mode) -> Result<ExperimentSpec> {
    let mut spec = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => ExperimentSpec::default(),
    };
    if let Some(o) = &args.objective {
        spec.objective = o.parse()?;
    }
    if args.config.is_none() {
        objective_defaults(&mut spec);
    }

    split(&args.particles, &mut spec.base.pop_size, &mut spec.sweep.pop_size);
    split(&args.c1, &mut spec.base.coefficients.c1, &mut spec.sweep.c1);
    split(&args.c2, &mut spec.base.coefficients.c2, &mut spec.sweep.c2);
    split(
        &args.initial_iters,
        &mut spec.base.initial_pso_iterations,
        &mut spec.sweep.initial_pso_iterations,
    );
    if let Some(w) = args.w {
        spec.base.coefficients.w = w;
    }
    if let Some(n) = args.iters {
        spec.base.stop.max_iterations = n;
    }
    if let Some(p) = args.consult_period {
        spec.base.consult_period = p;
    }
    if let Some(t) = args.target_cost {
        spec.base.stop.target_cost = Some(t);
    }
    if let Some(tol) = args.tolerance {
        spec.base.stop.epsilon = tol;
        if spec.base.stop.target_cost.is_none() && spec.objective == ObjectiveSpec::Rastrigin {
            spec.base.stop.target_cost = Some(0.0);
        }
    }
    if let Some(s) = args.stagnation {
        spec.base.stop.stagnation_window = Some(s);
    }
    if args.replace_k.is_some() {
        spec.base.replace_k = args.replace_k;
    }
    if let Some(r) = args.repeats {
        spec.repeats = r;
    }
    if let Some(s) = args.seed {
        spec.seed_base = s;
    }
    if let Some(a) = &args.advisor {
        spec.advisor = Some(a.parse::<AdvisorSpec>()?);
    }
    if let Some(m) = &args.model {
        spec.model = m.clone();
    }
    if let Some(t) = args.temperature {
        spec.temperature = t;
    }
    if args.audit.is_some() {
        spec.audit = args.audit.clone();
    }
    if let Some(t) = args.eval_timeout_ms {
        spec.external.timeout_ms = t;
    }
    if let Some(r) = args.eval_retries {
        spec.external.retries = r;
    }
    spec.paired |= args.paired;

    match mode {
        Mode::Pso => {
            if spec.advisor.is_some() {
                return Err(Error::Config("`pso` runs without an advisor; use `llm-pso`".into()));
            }
        }
        Mode::Hybrid => {
            if spec.advisor.is_none() {
                spec.advisor = Some(AdvisorSpec::Mock);
            }
        }
        Mode::Sweep => {}
    }
    spec.validate()?;
    Ok(spec)
}

fn print_summary(results: &ExperimentResults) {
    for w in &results.warnings {
        log::warn!("{w}");
    }
    for cell in &results.cells {
        let c = &cell.cell;
        let mut line = format!("pop={} c1={} c2={}", c.pop_size, c.c1, c.c2);
        if results.spec.advisor.is_some() {
            line.push_str(&format!(" initial={}", c.initial_pso_iterations));
        }
        if let Some(s) = &cell.iterations {
            line.push_str(&format!(" iterations={:.1}±{:.1}", s.mean, s.std));
        }
        if let Some(s) = &cell.model_calls {
            line.push_str(&format!(" model_calls={:.1}", s.mean));
        }
        if let Some(s) = &cell.final_cost {
            line.push_str(&format!(" best_cost={:.6}", s.mean));
        }
        line.push_str(&format!(
            " converged={}/{}",
            cell.converged_runs,
            cell.trials.len()
        ));
        if cell.failed_runs > 0 {
            line.push_str(&format!(" failed={}", cell.failed_runs));
        }
        if let Some(d) = cell.paired.as_ref().and_then(|p| p.delta_stats.as_ref()) {
            line.push_str(&format!(" call_delta={:.1}", d.mean));
        }
        println!("{line}");
    }
}

fn run_experiment(args: &RunArgs, mode: Mode) -> Result<i32> {
    let spec = build_spec(args, mode)?;
    let results = run_trials(&spec)?;
    print_summary(&results);
    if let Some(out) = &args.out {
        let format = match &args.format {
            Some(f) => f.parse()?,
            None => Format::from_path(out),
        };
        for path in emit_report(&results, format, out)? {
            log::info!("wrote {}", path.display());
        }
    }
    Ok(if results.failed_runs() > 0 { 1 } else { 0 })
}

fn run_grid(args: &GridArgs) -> Result<i32> {
    let spec: ObjectiveSpec = args.objective.parse()?;
    let objective = spec.build(None, &Default::default())?;
    if !objective.space().is_integral() {
        return Err(Error::Config(format!("{spec} has a continuous search space; eval-grid needs integer axes")));
    }
    let min = eval_grid(&objective)?;
    let names: Vec<&str> = objective.space().axes.iter().map(|a| a.name.as_str()).collect();
    let coords: Vec<String> = names
        .iter()
        .zip(&min.position)
        .map(|(n, x)| format!("{n}={x}"))
        .collect();
    println!("argmin {}", coords.join(" "));
    println!("cost {}", min.cost);
    println!("points {}", min.points);
    if let Some(out) = &args.out {
        let body = serde_json::json!({
            "objective": spec.to_string(),
            "axes": names,
            "argmin": min.position,
            "cost": min.cost,
            "points": min.points,
        });
        write_atomic(Path::new(out), &format!("{}\n", serde_json::to_string_pretty(&body)?))?;
    }
    Ok(0)
}

/// Parse `args` and run; returns the process exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = match &cli.command {
        Command::Pso(a) => run_experiment(a, Mode::Pso),
        Command::LlmPso(a) => run_experiment(a, Mode::Hybrid),
        Command::Sweep(a) => run_experiment(a, Mode::Sweep),
        Command::EvalGrid(a) => run_grid(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

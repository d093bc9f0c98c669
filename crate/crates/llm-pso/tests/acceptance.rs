//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Runs without the libtest harness so every line is printed.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use llm_pso::advisor::HttpAdvisor;
use llm_pso::external::{ExternalConfig, ProcessObjective};
use llm_pso::harness::{run_trials, ExperimentSpec, ObjectiveSpec};
use llm_pso::summarize;
use llm_pso_core::prompt::{format_velocity, ParticleRecord};
use llm_pso_core::{
    build_prompt, eval_grid, initialize_swarm, inject_suggestions, parse_response, render_suggestions, run_llm_pso,
    run_pso, suggest, CoefficientConfig, Counted, MockAdvisor, Objective, ObjectiveError, Rastrigin, RunConfig,
    RunError, SearchSpace, StoppingCriterion, Suggestion, SwarmConfig, SwarmRng, SwarmSnapshot, SyntheticLandscape,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Duration);

/// Pre-committed seeds for every "10 seeds" criterion.
const SEEDS: std::ops::RangeInclusive<u64> = 1..=10;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

// 1 -------------------------------------------------------------------------

const FRAGMENT: &str = "80, 3, 1.6, 1.2, 0.1342, 120, 4, 1.8, 1.5, 0.1030, 95, 2, 1.6, 1, 0.0012";

fn prompt_golden() -> Outcome {
    let rec = |n: f64, l: f64, vn: f64, vl: f64, cost: f64| ParticleRecord {
        position: vec![n, l],
        velocity: vec![vn, vl],
        cost,
    };
    let snapshot = SwarmSnapshot::new(
        SearchSpace::neurons_layers(),
        vec![
            rec(80.0, 3.0, 1.6, 1.2, 0.1342),
            rec(120.0, 4.0, 1.8, 1.5, 0.1030),
            rec(95.0, 2.0, 1.6, 1.0, 0.0012),
            rec(150.0, 5.0, -2.4, 0.3, 0.1421),
            rec(60.0, 2.0, 0.75, -1.0, 0.2210),
        ],
    )
    .map_err(|e| e.to_string())?;
    let prompt = build_prompt(&snapshot).map_err(|e| e.to_string())?;
    let expected = format!(
        "{}\n\n{FRAGMENT}, 150, 5, -2.4, 0.3, 0.1421, 60, 2, 0.75, -1, 0.2210\n\n{}",
        "Below is the string showing the best number of neurons as the first entry and best number of layers as the second entry of the DL model for 5 particles with their corresponding cost as the fifth entry, while dynamically updating the number of neurons and layers to reduce the cost for the same model using Particle Swarm Optimization. The third and the fourth entries are the neurons velocities and layers velocities, respectively. The first entry (Neurons) of the string ranges from 2 to 200, while the second entry (Layers) of the string ranges from 2 to 5.",
        "Give me exactly 5 more number of neurons and layers for the same model in order to reduce the cost further. Your response must be exactly in the same format as input and must contain only values. Your response must not contain the cost values."
    );
    check(prompt.contains(FRAGMENT), "fragment missing from prompt")?;
    check(prompt == expected, format!("prompt differs from template:\n{prompt}"))?;
    Ok(format!("fragment found, {} bytes match the template", prompt.len()))
}

// 2 -------------------------------------------------------------------------

fn ci_oracle() -> Outcome {
    // t(0.975, 2) has the closed form (2p - 1) / sqrt(2p(1 - p))
    let t2 = 0.95 / (2.0f64 * 0.975 * 0.025).sqrt();
    let mut details = Vec::new();
    for (samples, paper) in [
        ([0.1343, 0.1344, 0.1358], (0.1327, 0.1369)),
        ([0.8515, 0.8587, 0.8521], (0.8442, 0.8640)),
    ] {
        let s = summarize(&samples).map_err(|e| e.to_string())?;
        let mean = samples.iter().sum::<f64>() / 3.0;
        let sd = (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 2.0).sqrt();
        let half = t2 * sd / 3f64.sqrt();
        check(
            (s.ci95.0 - (mean - half)).abs() < 1e-9 && (s.ci95.1 - (mean + half)).abs() < 1e-9,
            format!("interval {:?} disagrees with closed-form oracle", s.ci95),
        )?;
        check(
            (s.ci95.0 - paper.0).abs() <= 1e-4 && (s.ci95.1 - paper.1).abs() <= 1e-4,
            format!("interval ({:.4}, {:.4}) vs expected {:?}", s.ci95.0, s.ci95.1, paper),
        )?;
        details.push(format!("({:.4}, {:.4})", s.ci95.0, s.ci95.1));
    }
    Ok(details.join(" and "))
}

// 3 -------------------------------------------------------------------------

fn model_call_arithmetic() -> Outcome {
    let (pop, iters) = (5usize, 10usize);
    let plain = RunConfig {
        pop_size: pop,
        stop: StoppingCriterion::max_iterations(iters),
        seed: 3,
        ..RunConfig::default()
    };
    let report = run_pso(&plain, &SyntheticLandscape::default()).map_err(|e| e.to_string())?;
    check(report.model_calls == pop * iters, format!("plain PSO: {} calls, want {}", report.model_calls, pop * iters))?;

    // 2 initial iterations, one evaluated consult, one more iteration
    let (initial, after, consults) = (2usize, 1usize, 1usize);
    let hybrid = RunConfig {
        pop_size: pop,
        initial_pso_iterations: initial,
        stop: StoppingCriterion::max_iterations(initial + after),
        seed: 3,
        ..RunConfig::default()
    };
    let report = run_llm_pso(&hybrid, &SyntheticLandscape::default(), &mut MockAdvisor::new(3))
        .map_err(|e| e.to_string())?;
    let want = pop * (initial + after) + pop * consults;
    check(report.consults == consults, format!("{} consults", report.consults))?;
    check(report.model_calls == want, format!("hybrid: {} calls, want {want}", report.model_calls))?;
    check(want == 20, "arithmetic")?;
    Ok(format!("plain {} calls, hybrid {} calls", pop * iters, report.model_calls))
}

// 4 -------------------------------------------------------------------------

fn rastrigin_trend() -> Outcome {
    let mut spec = ExperimentSpec {
        objective: ObjectiveSpec::Rastrigin,
        repeats: SEEDS.count(),
        seed_base: *SEEDS.start(),
        ..ExperimentSpec::default()
    };
    spec.base.coefficients = CoefficientConfig {
        c1: 0.5,
        c2: 0.5,
        ..CoefficientConfig::default()
    };
    spec.base.stop = StoppingCriterion::max_iterations(500).with_target(0.0, 1e-2);
    spec.sweep.pop_size = vec![20, 100];
    let results = run_trials(&spec).map_err(|e| e.to_string())?;
    let (small, large) = (&results.cells[0], &results.cells[1]);
    let mean = |c: &llm_pso::CellResult| c.iterations.as_ref().map(|s| s.mean).unwrap_or(f64::INFINITY);
    let summary = format!(
        "w={}, pop 20: mean {:.1} it, {}/10 converged; pop 100: mean {:.1} it, {}/10 converged",
        spec.base.coefficients.w,
        mean(small),
        small.converged_runs,
        mean(large),
        large.converged_runs
    );
    check(mean(large) < mean(small), format!("ordering violated: {summary}"))?;
    check(small.converged_runs >= 9 && large.converged_runs >= 9, format!("too few converged: {summary}"))?;
    Ok(summary)
}

// 5 -------------------------------------------------------------------------

fn oracle_dominance() -> Outcome {
    let objective = SyntheticLandscape::default();
    let grid = eval_grid(&objective).map_err(|e| e.to_string())?;
    let mut calls = Vec::new();
    for seed in SEEDS {
        let config = RunConfig {
            pop_size: 5,
            initial_pso_iterations: 2,
            stop: StoppingCriterion::max_iterations(50).with_target(grid.cost + 1e-9, 0.0),
            seed,
            ..RunConfig::default()
        };
        let hybrid = run_llm_pso(&config, &objective, &mut MockAdvisor::oracle(seed, grid.position.clone()))
            .map_err(|e| e.to_string())?;
        let plain = run_pso(&config, &objective).map_err(|e| e.to_string())?;
        check(hybrid.converged, format!("seed {seed}: hybrid did not converge"))?;
        check(hybrid.model_calls <= 15, format!("seed {seed}: {} calls", hybrid.model_calls))?;
        check(
            hybrid.model_calls < plain.model_calls,
            format!("seed {seed}: hybrid {} vs plain {}", hybrid.model_calls, plain.model_calls),
        )?;
        calls.push((hybrid.model_calls, plain.model_calls));
    }
    Ok(format!("(hybrid, plain) calls per seed: {calls:?}"))
}

// 6 -------------------------------------------------------------------------

const CASES: u32 = 1000;

fn runner() -> TestRunner {
    TestRunner::new(Config {
        cases: CASES,
        failure_persistence: None,
        ..Config::default()
    })
}

fn swarm_property(seed: u64, pop: usize, coeffs: CoefficientConfig, synthetic: bool, steps: usize) -> Result<(), TestCaseError> {
    let objective: Box<dyn Objective> = if synthetic {
        Box::new(SyntheticLandscape::default())
    } else {
        Box::new(Rastrigin::new(2))
    };
    let space = objective.space().clone();
    let mut swarm = initialize_swarm(&SwarmConfig::new(pop, coeffs), &space, seed).unwrap();
    swarm.evaluate_initial(&objective).unwrap();
    let mut rng = SwarmRng::seed_from_u64(!seed);
    let mut gbest = swarm.gbest_cost();
    let mut pbest: Vec<f64> = swarm.particles().iter().map(|p| p.pbest_cost).collect();
    for t in 0..steps {
        swarm.step(&objective).unwrap();
        let mut reset = Vec::new();
        if t % 2 == 1 {
            let evaluated: Vec<(Suggestion, f64)> = (0..pop)
                .map(|_| {
                    let position: Vec<f64> = space
                        .axes
                        .iter()
                        .map(|a| a.evaluation_point(rng.random_range(a.min..=a.max)))
                        .collect();
                    let cost = objective.evaluate(&position).unwrap();
                    let velocity = Some(space.axes.iter().map(|a| rng.random_range(-2.0 * a.v_max..=2.0 * a.v_max)).collect());
                    (Suggestion { position, velocity, clipped: false }, cost)
                })
                .collect();
            let record = inject_suggestions(&mut swarm, &evaluated, None, &mut rng);
            prop_assert!(record.gbest_after <= record.gbest_before, "injection raised gbest");
            reset = record.replaced_indices;
        }
        prop_assert!(swarm.gbest_cost() <= gbest, "gbest increased");
        gbest = swarm.gbest_cost();
        for (i, p) in swarm.particles().iter().enumerate() {
            prop_assert!(space.contains(&p.position), "position out of bounds");
            for (v, a) in p.velocity.iter().zip(&space.axes) {
                prop_assert!(v.abs() <= a.v_max + 1e-12, "velocity beyond limit");
            }
            prop_assert!(p.pbest_cost <= p.current_cost && gbest <= p.pbest_cost, "pbest dominance");
            if !reset.contains(&i) {
                prop_assert!(p.pbest_cost <= pbest[i], "pbest got worse");
            }
            pbest[i] = p.pbest_cost;
        }
    }
    Ok(())
}

fn invariant_suite() -> Outcome {
    let coeffs = (0.0..1.2f64, 0.0..2.5f64, 0.0..2.5f64).prop_map(|(w, c1, c2)| CoefficientConfig { w, c1, c2 });
    runner()
        .run(
            &(any::<u64>(), 1usize..20, coeffs, any::<bool>(), 1usize..10),
            |(seed, pop, coeffs, synthetic, steps)| swarm_property(seed, pop, coeffs, synthetic, steps),
        )
        .map_err(|e| format!("swarm invariants: {e}"))?;

    let space = SearchSpace::neurons_layers();
    runner()
        .run(&(any::<u64>(), 1usize..25, any::<bool>()), |(seed, npop, with_v)| {
            let mut rng = SwarmRng::seed_from_u64(seed);
            let suggestions: Vec<Suggestion> = (0..npop)
                .map(|_| Suggestion {
                    position: vec![rng.random_range(2..=200) as f64, rng.random_range(2..=5) as f64],
                    velocity: with_v.then(|| {
                        space
                            .axes
                            .iter()
                            .map(|a| format_velocity(rng.random_range(-a.v_max..=a.v_max)).parse().unwrap())
                            .collect()
                    }),
                    clipped: false,
                })
                .collect();
            let parsed = parse_response(&render_suggestions(&suggestions, &space), npop, &space).unwrap();
            prop_assert_eq!(parsed, suggestions);
            Ok(())
        })
        .map_err(|e| format!("parser round trip: {e}"))?;

    runner()
        .run(&(any::<u64>(), 1usize..30), |(seed, npop)| {
            let mut rng = SwarmRng::seed_from_u64(seed);
            let records = (0..npop)
                .map(|_| ParticleRecord {
                    position: vec![rng.random_range(2..=200) as f64, rng.random_range(2..=5) as f64],
                    velocity: vec![0.0, 0.0],
                    cost: rng.random_range(0.1..1.0),
                })
                .collect();
            let snapshot = SwarmSnapshot::new(space.clone(), records).unwrap();
            let exchange = suggest(&mut MockAdvisor::new(seed), &snapshot, 3, &mut rng).unwrap();
            prop_assert_eq!(exchange.parsed.len(), npop);
            Ok(())
        })
        .map_err(|e| format!("suggestion cardinality: {e}"))?;
    Ok(format!("3 properties x {CASES} cases"))
}

// 7 -------------------------------------------------------------------------

fn brute_force() -> Outcome {
    // independent scan with the landscape written out again
    let mut best = (f64::INFINITY, 0i64, 0i64);
    let mut points = 0;
    for layers in 2..=5i64 {
        for neurons in 2..=200i64 {
            let (l, n) = (layers as f64, neurons as f64);
            let s = (std::f64::consts::PI * n / 20.0).sin();
            let c = 0.13 + 0.01 * (l - 3.0).powi(2) / 9.0 + 0.01 * ((n - 120.0) / 200.0).powi(2) + 0.002 * s * s;
            points += 1;
            if c < best.0 {
                best = (c, layers, neurons);
            }
        }
    }
    check(points == 796 && (best.1, best.2) == (3, 120), format!("oracle scan {best:?}"))?;
    let objective = SyntheticLandscape::default();
    let grid = eval_grid(&objective).map_err(|e| e.to_string())?;
    check(grid.points == 796, format!("{} grid points", grid.points))?;
    check(grid.position == vec![120.0, 3.0], format!("argmin {:?}", grid.position))?;
    check((grid.cost - 0.13).abs() < 1e-12 && (grid.cost - best.0).abs() < 1e-12, format!("cost {}", grid.cost))?;

    let mut close = 0;
    for seed in SEEDS {
        let config = RunConfig {
            pop_size: 5,
            stop: StoppingCriterion::max_iterations(50),
            seed,
            ..RunConfig::default()
        };
        let report = run_pso(&config, &objective).map_err(|e| e.to_string())?;
        if report.global_best_cost - grid.cost <= 1e-3 {
            close += 1;
        }
    }
    check(close >= 9, format!("only {close}/10 seeds within 1e-3"))?;
    Ok(format!("argmin (layers 3, neurons 120) cost 0.13 over 796 points; PSO within 1e-3 on {close}/10 seeds"))
}

// 8 -------------------------------------------------------------------------

fn protocol_conformance() -> Outcome {
    let config = RunConfig {
        pop_size: 5,
        initial_pso_iterations: 2,
        stop: StoppingCriterion::max_iterations(3),
        seed: 4,
        ..RunConfig::default()
    };
    let ext = ExternalConfig {
        timeout_ms: 5_000,
        retries: 0,
        reentrant: false,
    };

    let proc_objective = Counted::new(
        ProcessObjective::spawn(&format!("{STUB} --costs 0.20,0.18,0.25,0.19,0.22,0.17,0.21"), SearchSpace::neurons_layers(), ext.clone())
            .map_err(|e| e.to_string())?,
    );
    let report = run_llm_pso(&config, &proc_objective, &mut MockAdvisor::new(4)).map_err(|e| e.to_string())?;
    check(report.model_calls == 20, format!("process stub run: {} calls", report.model_calls))?;
    check(proc_objective.eval_count() == 25, format!("process stub saw {} requests", proc_objective.eval_count()))?;

    let chat = canned_chat(COMPLIANT);
    let mut advisor = HttpAdvisor::new(&chat.base, "stub", 0.7, Duration::from_secs(5));
    let report = run_llm_pso(&config, &SyntheticLandscape::default(), &mut advisor).map_err(|e| e.to_string())?;
    let ex = &report.advisor_exchanges[0];
    check(
        report.model_calls == 20 && ex.attempts == 1 && !ex.fallback && chat.count() == 1,
        format!("chat stub run: {} calls, {} attempts, fallback {}", report.model_calls, ex.attempts, ex.fallback),
    )?;

    let bad = ProcessObjective::spawn(&format!("{STUB} --costs 0.1 --malformed"), SearchSpace::neurons_layers(), ext)
        .map_err(|e| e.to_string())?;
    match run_llm_pso(&config, &bad, &mut MockAdvisor::new(4)) {
        Err(RunError::Objective { source: ObjectiveError::Protocol { .. }, .. }) => {}
        other => return Err(format!("malformed evaluator reply gave {other:?}")),
    }

    let broken = StubServer::start(|_, _| (200, chat_completion("no numbers here")));
    let mut advisor = HttpAdvisor::new(&broken.base, "stub", 0.7, Duration::from_secs(5));
    let report = run_llm_pso(&config, &SyntheticLandscape::default(), &mut advisor).map_err(|e| e.to_string())?;
    let ex = &report.advisor_exchanges[0];
    check(
        ex.attempts == 3 && ex.fallback && ex.parsed.len() == 5 && broken.count() == 3 && report.model_calls == 20,
        format!("malformed advisor: {} attempts, fallback {}", ex.attempts, ex.fallback),
    )?;
    Ok("process and chat stubs complete with 20 calls; protocol error typed; advisor retried 3x then fell back".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("prompt golden", prompt_golden, Duration::from_secs(1)),
        ("CI oracle", ci_oracle, Duration::from_secs(1)),
        ("model-call arithmetic", model_call_arithmetic, Duration::from_secs(1)),
        ("Rastrigin trend", rastrigin_trend, Duration::from_secs(60)),
        ("oracle-advisor dominance", oracle_dominance, Duration::from_secs(10)),
        ("invariant suite", invariant_suite, Duration::from_secs(30)),
        ("brute-force equivalence", brute_force, Duration::from_secs(10)),
        ("protocol conformance", protocol_conformance, Duration::from_secs(10)),
    ];
    let mut failed = 0;
    for (i, (name, f, limit)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = f();
        let elapsed = started.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > *limit => Err(format!("{detail}; took {elapsed:.2?}, limit {limit:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("criterion {} PASS {name}: {detail} ({elapsed:.2?})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} FAIL {name}: {detail} ({elapsed:.2?})", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

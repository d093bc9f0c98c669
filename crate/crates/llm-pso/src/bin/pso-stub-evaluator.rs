//! Scriptable evaluator for the JSON-lines protocol, used in tests.
//!
//! Reads requests on stdin and answers each on stdout: cycles through
//! `--costs`, or scores the synthetic landscape with `--objective synthetic`.

use std::io::{self, BufRead, Write};
use std::thread;
use std::time::Duration;

use clap::Parser;
use serde_json::{json, Value};

#[derive(Debug, Parser)]
struct Args {
    /// Costs to return in order, cycling.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    costs: Vec<f64>,
    /// `synthetic` scores candidates with the in-repo landscape.
    #[arg(long)]
    objective: Option<String>,
    /// Answer `{"cost": "abc"}` instead of a number.
    #[arg(long)]
    malformed: bool,
    /// Sleep before every reply.
    #[arg(long = "delay-ms", default_value_t = 0)]
    delay_ms: u64,
    /// Reply with an id that does not match the request.
    #[arg(long = "wrong-id")]
    wrong_id: bool,
    /// Report `accuracy` (1 - cost) instead of `cost`.
    #[arg(long)]
    accuracy: bool,
}

fn synthetic(candidate: &Value) -> Option<f64> {
    let layers = candidate.get("layers")?.as_i64()?;
    let neurons = candidate.get("neurons")?.as_i64()?;
    llm_pso_core::synthetic_landscape(layers, neurons).ok()
}

fn main() {
    let args = Args::parse();
    if args.costs.is_empty() && args.objective.as_deref() != Some("synthetic") {
        eprintln!("pso-stub-evaluator: give --costs or --objective synthetic");
        std::process::exit(2);
    }
    let stdin = io::stdin();
    let mut stdout = io::stdout().lock();
    for (n, line) in stdin.lock().lines().enumerate() {
        let Ok(line) = line else { break };
        let Ok(request) = serde_json::from_str::<Value>(&line) else {
            eprintln!("pso-stub-evaluator: bad request {line:?}");
            continue;
        };
        let id = request["id"].as_u64().unwrap_or(0);
        let cost = if args.costs.is_empty() {
            synthetic(&request["candidate"]).unwrap_or(f64::MAX)
        } else {
            args.costs[n % args.costs.len()]
        };
        if args.delay_ms > 0 {
            thread::sleep(Duration::from_millis(args.delay_ms));
        }
        let id = if args.wrong_id { id + 1000 } else { id };
        let reply = if args.malformed {
            json!({"id": id, "cost": "abc"})
        } else if args.accuracy {
            json!({"id": id, "accuracy": 1.0 - cost})
        } else {
            json!({"id": id, "cost": cost})
        };
        if writeln!(stdout, "{reply}").and_then(|_| stdout.flush()).is_err() {
            break;
        }
    }
}

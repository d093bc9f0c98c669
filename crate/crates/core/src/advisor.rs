//! Advisor backends and the consult-with-retry routine.

use alloc::collections::VecDeque;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::AdvisorError;
use crate::prompt::{build_prompt, parse_response, render_suggestions, SwarmSnapshot};
use crate::space::SearchSpace;
use crate::SwarmRng;

/// Default number of attempts per consult.
pub const DEFAULT_RETRY_LIMIT: usize = 3;

/// A candidate position proposed by an advisor, already inside the bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub position: Vec<f64>,
    pub velocity: Option<Vec<f64>>,
    /// Some value was outside the search space and got clipped.
    #[serde(default)]
    pub clipped: bool,
}

/// What produced a response, recorded in run reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvisorInfo {
    pub backend: String,
    pub model: Option<String>,
    pub temperature: Option<f64>,
}

/// Anything that can answer a rendered prompt.
///
/// The snapshot is passed alongside the prompt so offline backends can
/// answer without parsing the prompt text back.
pub trait AdvisorBackend {
    fn info(&self) -> AdvisorInfo;

    fn complete(&mut self, prompt: &str, snapshot: &SwarmSnapshot) -> Result<String, AdvisorError>;
}

impl<B: AdvisorBackend + ?Sized> AdvisorBackend for &mut B {
    fn info(&self) -> AdvisorInfo {
        (**self).info()
    }
    fn complete(&mut self, prompt: &str, snapshot: &SwarmSnapshot) -> Result<String, AdvisorError> {
        (**self).complete(prompt, snapshot)
    }
}

impl<B: AdvisorBackend + ?Sized> AdvisorBackend for alloc::boxed::Box<B> {
    fn info(&self) -> AdvisorInfo {
        (**self).info()
    }
    fn complete(&mut self, prompt: &str, snapshot: &SwarmSnapshot) -> Result<String, AdvisorError> {
        (**self).complete(prompt, snapshot)
    }
}

/// Audit record of one consult.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvisorExchange {
    /// Swarm iteration at which the advisor was consulted.
    pub iteration: usize,
    pub backend: String,
    pub prompt: String,
    /// Last response body received (empty if none arrived).
    pub raw_response: String,
    pub parsed: Vec<Suggestion>,
    pub attempts: usize,
    /// Suggestions are random positions because every attempt failed.
    pub fallback: bool,
    /// One message per failed attempt.
    pub failures: Vec<String>,
}

/// Build the prompt, query `backend` and parse the answer.
///
/// Up to `retry_limit` attempts are made. If every attempt fails and at
/// least one response body arrived, the exchange falls back to uniformly
/// random in-bounds suggestions (`fallback = true`). If no attempt got a
/// response at all, the last transport error is returned.
pub fn suggest<B: AdvisorBackend + ?Sized, R: Rng + ?Sized>(
    backend: &mut B,
    snapshot: &SwarmSnapshot,
    retry_limit: usize,
    rng: &mut R,
) -> Result<AdvisorExchange, AdvisorError> {
    let prompt = build_prompt(snapshot)?;
    let npop = snapshot.npop();
    let limit = retry_limit.max(1);
    let mut exchange = AdvisorExchange {
        iteration: 0,
        backend: backend.info().backend,
        prompt,
        raw_response: String::new(),
        parsed: Vec::new(),
        attempts: 0,
        fallback: false,
        failures: Vec::new(),
    };
    let mut got_response = false;
    let mut last_transport = None;

    while exchange.attempts < limit {
        exchange.attempts += 1;
        match backend.complete(&exchange.prompt, snapshot) {
            Ok(text) => {
                got_response = true;
                let parsed = parse_response(&text, npop, &snapshot.space);
                exchange.raw_response = text;
                match parsed {
                    Ok(suggestions) => {
                        exchange.parsed = suggestions;
                        return Ok(exchange);
                    }
                    Err(e) => exchange.failures.push(e.to_string()),
                }
            }
            Err(e @ AdvisorError::Transport(_)) => {
                exchange.failures.push(e.to_string());
                last_transport = Some(e);
            }
            Err(e) => {
                got_response = true;
                exchange.failures.push(e.to_string());
            }
        }
    }

    if !got_response {
        return Err(last_transport.unwrap_or_else(|| AdvisorError::Transport("no attempts".into())));
    }
    exchange.fallback = true;
    exchange.parsed = random_suggestions(&snapshot.space, npop, rng);
    Ok(exchange)
}

/// Uniform in-bounds positions (rounded on integral axes), no velocities.
pub fn random_suggestions<R: Rng + ?Sized>(
    space: &SearchSpace,
    npop: usize,
    rng: &mut R,
) -> Vec<Suggestion> {
    (0..npop)
        .map(|_| Suggestion {
            position: space
                .axes
                .iter()
                .map(|a| a.evaluation_point(rng.random_range(a.min..=a.max)))
                .collect(),
            velocity: None,
            clipped: false,
        })
        .collect()
}

fn round2(x: f64) -> f64 {
    libm::round(x * 100.0) / 100.0
}

/// Offline advisor: `npop` points drawn from a box around the snapshot's
/// best particle, half-width 10% of each axis range, clipped to bounds.
///
/// With `oracle` set, the first suggestion is that position instead.
pub fn heuristic_mock_suggest<R: Rng + ?Sized>(
    snapshot: &SwarmSnapshot,
    rng: &mut R,
    oracle: Option<&[f64]>,
) -> Vec<Suggestion> {
    let space = &snapshot.space;
    let centre = snapshot
        .best_index()
        .map(|i| snapshot.records[i].position.clone())
        .unwrap_or_else(|| space.axes.iter().map(|a| 0.5 * (a.min + a.max)).collect());

    (0..snapshot.npop())
        .map(|i| {
            if let (0, Some(best)) = (i, oracle) {
                return Suggestion {
                    position: space.evaluation_point(best),
                    velocity: Some(alloc::vec![0.0; space.dims()]),
                    clipped: false,
                };
            }
            let position = space
                .axes
                .iter()
                .zip(&centre)
                .map(|(a, c)| {
                    let r = 0.1 * a.range();
                    a.evaluation_point(c + rng.random_range(-r..=r))
                })
                .collect();
            let velocity = space
                .axes
                .iter()
                .map(|a| round2(rng.random_range(-a.v_max..=a.v_max)).clamp(-a.v_max, a.v_max))
                .collect();
            Suggestion {
                position,
                velocity: Some(velocity),
                clipped: false,
            }
        })
        .collect()
}

/// Seeded offline advisor built on [`heuristic_mock_suggest`]. Its answers
/// go through the same text format a remote model would use.
#[derive(Debug, Clone)]
pub struct MockAdvisor {
    rng: SwarmRng,
    oracle: Option<Vec<f64>>,
}

impl MockAdvisor {
    pub fn new(seed: u64) -> Self {
        MockAdvisor {
            rng: SwarmRng::seed_from_u64(seed),
            oracle: None,
        }
    }

    /// Variant whose first suggestion is always `optimum`.
    pub fn oracle(seed: u64, optimum: Vec<f64>) -> Self {
        MockAdvisor {
            rng: SwarmRng::seed_from_u64(seed),
            oracle: Some(optimum),
        }
    }
}

impl AdvisorBackend for MockAdvisor {
    fn info(&self) -> AdvisorInfo {
        AdvisorInfo {
            backend: if self.oracle.is_some() { "mock-oracle" } else { "mock" }.to_string(),
            model: None,
            temperature: None,
        }
    }

    fn complete(&mut self, _prompt: &str, snapshot: &SwarmSnapshot) -> Result<String, AdvisorError> {
        let suggestions = heuristic_mock_suggest(snapshot, &mut self.rng, self.oracle.as_deref());
        Ok(render_suggestions(&suggestions, &snapshot.space))
    }
}

/// Plays back canned response bodies in order.
#[derive(Debug, Clone, Default)]
pub struct ScriptedAdvisor {
    responses: VecDeque<String>,
}

impl ScriptedAdvisor {
    pub fn new<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ScriptedAdvisor {
            responses: responses.into_iter().map(Into::into).collect(),
        }
    }

    pub fn remaining(&self) -> usize {
        self.responses.len()
    }
}

impl AdvisorBackend for ScriptedAdvisor {
    fn info(&self) -> AdvisorInfo {
        AdvisorInfo {
            backend: "scripted".to_string(),
            model: None,
            temperature: None,
        }
    }

    fn complete(&mut self, _prompt: &str, _snapshot: &SwarmSnapshot) -> Result<String, AdvisorError> {
        self.responses
            .pop_front()
            .ok_or_else(|| AdvisorError::Transport("transcript exhausted".into()))
    }
}

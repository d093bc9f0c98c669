//! Prompt rendering and response parsing for swarm advisors.
//!
//! The particle string lists, per particle and in particle order: first axis
//! position, second axis position, first axis velocity, second axis
//! velocity, cost. Integral positions are printed as integers, velocities
//! with at most two decimals and costs with exactly four, so a snapshot
//! always renders to the same bytes.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::advisor::Suggestion;
use crate::error::AdvisorError;
use crate::space::{Axis, SearchSpace};
use crate::swarm::Swarm;

/// One particle as shown to an advisor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleRecord {
    /// Evaluation point (rounded on integral axes).
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub cost: f64,
}

/// Swarm state handed to an advisor, ordered by particle index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwarmSnapshot {
    pub records: Vec<ParticleRecord>,
    pub space: SearchSpace,
}

impl SwarmSnapshot {
    pub fn new(space: SearchSpace, records: Vec<ParticleRecord>) -> Result<Self, AdvisorError> {
        let snap = SwarmSnapshot { records, space };
        snap.validate()?;
        Ok(snap)
    }

    /// Current positions, velocities and costs of every particle.
    pub fn from_swarm(swarm: &Swarm) -> Self {
        let space = swarm.space().clone();
        let records = swarm
            .particles()
            .iter()
            .map(|p| ParticleRecord {
                position: space.evaluation_point(&p.position),
                velocity: p.velocity.clone(),
                cost: p.current_cost,
            })
            .collect();
        SwarmSnapshot { records, space }
    }

    pub fn npop(&self) -> usize {
        self.records.len()
    }

    /// Index of the lowest-cost record (first one on ties).
    pub fn best_index(&self) -> Option<usize> {
        self.records
            .iter()
            .enumerate()
            .fold(None, |best: Option<(usize, f64)>, (i, r)| match best {
                Some((_, c)) if c <= r.cost => best,
                _ => Some((i, r.cost)),
            })
            .map(|(i, _)| i)
    }

    pub fn validate(&self) -> Result<(), AdvisorError> {
        if self.records.is_empty() {
            return Err(AdvisorError::Snapshot("snapshot has no particles".into()));
        }
        let dims = self.space.dims();
        for (i, r) in self.records.iter().enumerate() {
            if r.position.len() != dims || r.velocity.len() != dims {
                return Err(AdvisorError::Snapshot(format!(
                    "particle {i} has {} coordinates, space has {dims}",
                    r.position.len()
                )));
            }
            if !r.cost.is_finite() {
                return Err(AdvisorError::Snapshot(format!(
                    "particle {i} has not been evaluated"
                )));
            }
        }
        Ok(())
    }
}

fn trim_decimals(mut s: String) -> String {
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".to_string();
    }
    s
}

/// Integral axes print as integers; continuous ones with up to 4 decimals.
pub fn format_position(axis: &Axis, value: f64) -> String {
    if axis.integral {
        format!("{}", libm::round(value) as i64)
    } else {
        trim_decimals(format!("{value:.4}"))
    }
}

/// At most two decimals, trailing zeros dropped: `1.6`, `1`, `1.25`.
pub fn format_velocity(value: f64) -> String {
    trim_decimals(format!("{value:.2}"))
}

/// Exactly four decimals: `0.1030`.
pub fn format_cost(value: f64) -> String {
    format!("{value:.4}")
}

/// The comma-separated particle string embedded in the prompt.
pub fn particle_string(snapshot: &SwarmSnapshot) -> String {
    let mut fields: Vec<String> = Vec::with_capacity(snapshot.npop() * (2 * snapshot.space.dims() + 1));
    for r in &snapshot.records {
        for (axis, x) in snapshot.space.axes.iter().zip(&r.position) {
            fields.push(format_position(axis, *x));
        }
        fields.extend(r.velocity.iter().map(|v| format_velocity(*v)));
        fields.push(format_cost(r.cost));
    }
    fields.join(", ")
}

/// Render the advisor prompt for a two-axis snapshot (neurons, layers).
pub fn build_prompt(snapshot: &SwarmSnapshot) -> Result<String, AdvisorError> {
    snapshot.validate()?;
    if snapshot.space.dims() != 2 {
        return Err(AdvisorError::Snapshot(format!(
            "prompt template needs exactly 2 axes, space has {}",
            snapshot.space.dims()
        )));
    }
    let npop = snapshot.npop();
    let first = &snapshot.space.axes[0];
    let second = &snapshot.space.axes[1];
    let bound = |a: &Axis, x: f64| format_position(a, x);
    Ok(format!(
        "Below is the string showing the best number of neurons as the first entry and best \
number of layers as the second entry of the DL model for {npop} particles with their \
corresponding cost as the fifth entry, while dynamically updating the number of neurons and \
layers to reduce the cost for the same model using Particle Swarm Optimization. The third and \
the fourth entries are the neurons velocities and layers velocities, respectively. The first \
entry (Neurons) of the string ranges from {} to {}, while the second entry (Layers) of the \
string ranges from {} to {}.\n\n{}\n\nGive me exactly {npop} more number of neurons and layers \
for the same model in order to reduce the cost further. Your response must be exactly in the \
same format as input and must contain only values. Your response must not contain the cost \
values.",
        bound(first, first.min),
        bound(first, first.max),
        bound(second, second.min),
        bound(second, second.max),
        particle_string(snapshot),
    ))
}

/// Every decimal number in `text`, in order. Numbers glued to a preceding
/// letter (`x1`, `run2`) are skipped; a `-` directly before a digit is a sign.
pub fn numeric_tokens(text: &str) -> Vec<f64> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let after_letter = i > 0 && (bytes[i - 1].is_ascii_alphabetic() || bytes[i - 1] == b'_');
        let digit_at = |j: usize| bytes.get(j).is_some_and(u8::is_ascii_digit);
        let signed = bytes[i] == b'-' && digit_at(i + 1);
        if after_letter && bytes[i].is_ascii_alphanumeric() {
            while i < bytes.len() && bytes[i].is_ascii_alphanumeric() {
                i += 1;
            }
            continue;
        }
        if after_letter || !(signed || digit_at(i)) {
            i += 1;
            continue;
        }
        let start = i;
        if signed {
            i += 1;
        }
        while digit_at(i) {
            i += 1;
        }
        if bytes.get(i) == Some(&b'.') && digit_at(i + 1) {
            i += 1;
            while digit_at(i) {
                i += 1;
            }
        }
        if let Ok(v) = text[start..i].parse::<f64>() {
            out.push(v);
        }
    }
    out
}

/// Turn advisor text into exactly `npop` suggestions.
///
/// Accepts either `2·d` numbers per suggestion (positions then velocities)
/// or `d` numbers (positions only), where `d` is the number of axes.
/// Out-of-range positions are clipped and the suggestion is flagged.
pub fn parse_response(
    text: &str,
    npop: usize,
    space: &SearchSpace,
) -> Result<Vec<Suggestion>, AdvisorError> {
    let dims = space.dims();
    let tokens = numeric_tokens(text);
    let parse_err = |message: String| AdvisorError::Parse {
        message,
        raw: text.to_string(),
    };
    if npop == 0 {
        return Err(parse_err("npop must be positive".into()));
    }
    let width = if tokens.len() == 2 * dims * npop {
        2 * dims
    } else if tokens.len() == dims * npop {
        dims
    } else {
        return Err(parse_err(format!(
            "found {} numbers, expected {} or {} for {npop} suggestions",
            tokens.len(),
            2 * dims * npop,
            dims * npop
        )));
    };

    Ok(tokens
        .chunks_exact(width)
        .map(|rec| {
            let mut clipped = false;
            let position = space
                .axes
                .iter()
                .zip(&rec[..dims])
                .map(|(axis, &x)| {
                    let c = axis.clip(x);
                    clipped |= c != x;
                    if axis.integral {
                        libm::round(c)
                    } else {
                        c
                    }
                })
                .collect();
            // velocities are clamped when the suggestion is injected
            let velocity = (width == 2 * dims).then(|| rec[dims..].to_vec());
            Suggestion {
                position,
                velocity,
                clipped,
            }
        })
        .collect())
}

/// Render suggestions in the response format an advisor is asked to use.
pub fn render_suggestions(suggestions: &[Suggestion], space: &SearchSpace) -> String {
    let mut fields = Vec::new();
    for s in suggestions {
        for (axis, x) in space.axes.iter().zip(&s.position) {
            fields.push(format_position(axis, *x));
        }
        if let Some(v) = &s.velocity {
            fields.extend(v.iter().map(|v| format_velocity(*v)));
        }
    }
    fields.join(", ")
}

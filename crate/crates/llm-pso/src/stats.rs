//! Mean, sample standard deviation and two-sided Student-t intervals.

use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

#[derive(Debug, Clone, PartialEq)]
pub enum StatsError {
    Empty,
    NonFinite { index: usize, value: f64 },
}

impl fmt::Display for StatsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatsError::Empty => f.write_str("no samples to summarize"),
            StatsError::NonFinite { index, value } => write!(f, "sample {index} is not finite ({value})"),
        }
    }
}

impl std::error::Error for StatsError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialStatistics {
    pub samples: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for a single sample.
    pub std: f64,
    pub ci95: (f64, f64),
    pub n: usize,
    /// Set when n = 1 and no spread can be estimated.
    #[serde(default)]
    pub degenerate: bool,
}

/// Two-sided 97.5% quantile of Student's t with `dof` degrees of freedom.
pub fn t_quantile_975(dof: usize) -> f64 {
    StudentsT::new(0.0, 1.0, dof as f64)
        .expect("dof >= 1 is a valid Student-t parameter")
        .inverse_cdf(0.975)
}

pub fn summarize(samples: &[f64]) -> Result<TrialStatistics, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::Empty);
    }
    if let Some((index, &value)) = samples.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(StatsError::NonFinite { index, value });
    }
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Ok(TrialStatistics {
            samples: samples.to_vec(),
            mean,
            std: 0.0,
            ci95: (mean, mean),
            n,
            degenerate: true,
        });
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let std = var.sqrt();
    let half = t_quantile_975(n - 1) * std / (n as f64).sqrt();
    Ok(TrialStatistics {
        samples: samples.to_vec(),
        mean,
        std,
        ci95: (mean - half, mean + half),
        n,
        degenerate: false,
    })
}

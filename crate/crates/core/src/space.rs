use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// One dimension of the search space.
///
/// `v_max` is in the axis' own units. Positions on integral axes stay
/// real-valued inside the swarm and are rounded only when a candidate is
/// handed to an objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub v_max: f64,
    pub integral: bool,
}

/// Velocity limit for an axis spanning `[min, max]`: one fifth of the range,
/// but never below one unit.
pub fn default_velocity_limit(min: f64, max: f64) -> f64 {
    let fifth = 0.2 * (max - min);
    if fifth < 1.0 {
        1.0
    } else {
        fifth
    }
}

impl Axis {
    pub fn integer(name: &str, min: i64, max: i64) -> Self {
        let (min, max) = (min as f64, max as f64);
        Axis {
            name: name.to_string(),
            min,
            max,
            v_max: default_velocity_limit(min, max),
            integral: true,
        }
    }

    pub fn continuous(name: &str, min: f64, max: f64) -> Self {
        Axis {
            name: name.to_string(),
            min,
            max,
            v_max: default_velocity_limit(min, max),
            integral: false,
        }
    }

    pub fn with_v_max(mut self, v_max: f64) -> Self {
        self.v_max = v_max;
        self
    }

    pub fn range(&self) -> f64 {
        self.max - self.min
    }

    pub fn clip(&self, x: f64) -> f64 {
        x.clamp(self.min, self.max)
    }

    /// Value actually handed to an objective.
    pub fn evaluation_point(&self, x: f64) -> f64 {
        let x = self.clip(x);
        if self.integral {
            // min/max are whole numbers on integral axes, so rounding stays in bounds.
            libm::round(x)
        } else {
            x
        }
    }

    pub fn clamp_velocity(&self, v: f64) -> f64 {
        v.clamp(-self.v_max, self.v_max)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let bad = |reason| {
            Err(ConfigError::InvalidAxis {
                axis: self.name.clone(),
                reason,
            })
        };
        if !self.min.is_finite() || !self.max.is_finite() {
            return bad("bounds must be finite");
        }
        if self.min >= self.max {
            return bad("min must be strictly below max");
        }
        if !self.v_max.is_finite() || self.v_max <= 0.0 {
            return bad("v_max must be positive and finite");
        }
        if self.integral && (libm::trunc(self.min) != self.min || libm::trunc(self.max) != self.max) {
            return bad("integral axis needs whole-number bounds");
        }
        Ok(())
    }
}

/// Ordered list of axes. Position vectors are indexed in the same order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub axes: Vec<Axis>,
}

impl SearchSpace {
    pub fn new(axes: Vec<Axis>) -> Result<Self, ConfigError> {
        let space = SearchSpace { axes };
        space.validate()?;
        Ok(space)
    }

    /// Neurons in `[2, 200]` then layers in `[2, 5]`, both integral.
    ///
    /// Axis order follows the advisor prompt: neurons first, layers second.
    pub fn neurons_layers() -> Self {
        SearchSpace {
            axes: alloc::vec![Axis::integer("neurons", 2, 200), Axis::integer("layers", 2, 5)],
        }
    }

    /// `dims` continuous axes over `[-5.12, 5.12]`.
    pub fn rastrigin(dims: usize) -> Self {
        SearchSpace {
            axes: (0..dims)
                .map(|i| Axis::continuous(&alloc::format!("x{i}"), -5.12, 5.12))
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.axes.is_empty() {
            return Err(ConfigError::EmptySpace);
        }
        self.axes.iter().try_for_each(Axis::validate)
    }

    pub fn dims(&self) -> usize {
        self.axes.len()
    }

    pub fn axis_index(&self, name: &str) -> Option<usize> {
        self.axes.iter().position(|a| a.name == name)
    }

    pub fn is_integral(&self) -> bool {
        self.axes.iter().all(|a| a.integral)
    }

    /// Clip every coordinate into its axis bounds.
    pub fn project(&self, x: &mut [f64]) {
        for (xi, axis) in x.iter_mut().zip(&self.axes) {
            *xi = axis.clip(*xi);
        }
    }

    pub fn clamp_velocity(&self, v: &mut [f64]) {
        for (vi, axis) in v.iter_mut().zip(&self.axes) {
            *vi = axis.clamp_velocity(*vi);
        }
    }

    /// Clipped and, on integral axes, rounded copy of `x`.
    pub fn evaluation_point(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.axes)
            .map(|(xi, axis)| axis.evaluation_point(*xi))
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dims()
            && x
                .iter()
                .zip(&self.axes)
                .all(|(xi, a)| *xi >= a.min && *xi <= a.max)
    }
}

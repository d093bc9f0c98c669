//! Objective functions. Every objective is minimized.

use alloc::vec::Vec;
use core::f64::consts::PI;
use core::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{BatchError, ObjectiveError};
use crate::space::SearchSpace;

/// A cost function over a [`SearchSpace`].
///
/// Candidates arrive already clipped and rounded on integral axes, in axis
/// order. Implementations that can be called from several threads at once
/// report `reentrant() == true`; batch evaluation may then be parallelized by
/// a wrapper that overrides [`Objective::evaluate_batch`].
pub trait Objective {
    fn space(&self) -> &SearchSpace;

    fn evaluate(&self, candidate: &[f64]) -> Result<f64, ObjectiveError>;

    fn reentrant(&self) -> bool {
        false
    }

    /// Evaluate a batch, returning costs in candidate order.
    fn evaluate_batch(&self, batch: &[Vec<f64>]) -> Result<Vec<f64>, BatchError> {
        batch
            .iter()
            .enumerate()
            .map(|(index, c)| self.evaluate(c).map_err(|source| BatchError { index, source }))
            .collect()
    }
}

impl<O: Objective + ?Sized> Objective for &O {
    fn space(&self) -> &SearchSpace {
        (**self).space()
    }
    fn evaluate(&self, candidate: &[f64]) -> Result<f64, ObjectiveError> {
        (**self).evaluate(candidate)
    }
    fn reentrant(&self) -> bool {
        (**self).reentrant()
    }
    fn evaluate_batch(&self, batch: &[Vec<f64>]) -> Result<Vec<f64>, BatchError> {
        (**self).evaluate_batch(batch)
    }
}

impl<O: Objective + ?Sized> Objective for alloc::boxed::Box<O> {
    fn space(&self) -> &SearchSpace {
        (**self).space()
    }
    fn evaluate(&self, candidate: &[f64]) -> Result<f64, ObjectiveError> {
        (**self).evaluate(candidate)
    }
    fn reentrant(&self) -> bool {
        (**self).reentrant()
    }
    fn evaluate_batch(&self, batch: &[Vec<f64>]) -> Result<Vec<f64>, BatchError> {
        (**self).evaluate_batch(batch)
    }
}

pub const RASTRIGIN_A: f64 = 10.0;
pub const RASTRIGIN_BOUND: f64 = 5.12;

/// `A·n + Σ (x_i² − A·cos(2π·x_i))` with `A = 10`.
///
/// Every coordinate must lie in `[-5.12, 5.12]`.
pub fn rastrigin(x: &[f64]) -> Result<f64, ObjectiveError> {
    let mut sum = RASTRIGIN_A * x.len() as f64;
    for (axis, &xi) in x.iter().enumerate() {
        if !(-RASTRIGIN_BOUND..=RASTRIGIN_BOUND).contains(&xi) {
            return Err(ObjectiveError::Domain { axis, value: xi });
        }
        sum += xi * xi - RASTRIGIN_A * libm::cos(2.0 * PI * xi);
    }
    Ok(sum)
}

/// Deterministic stand-in for a network-training cost surface over
/// `(layers, neurons)`. Quadratic bowl centred at `(3, 120)` with a
/// period-20 ripple in `neurons`; the integer-grid minimum is `0.13` at
/// `(3, 120)`.
pub fn synthetic_landscape(layers: i64, neurons: i64) -> Result<f64, ObjectiveError> {
    if !(2..=5).contains(&layers) {
        return Err(ObjectiveError::Domain {
            axis: 1,
            value: layers as f64,
        });
    }
    if !(2..=200).contains(&neurons) {
        return Err(ObjectiveError::Domain {
            axis: 0,
            value: neurons as f64,
        });
    }
    let (l, n) = (layers as f64, neurons as f64);
    let ripple = libm::sin(PI * n / 20.0);
    Ok(0.13
        + 0.01 * ((l - 3.0) * (l - 3.0) / 9.0)
        + 0.01 * ((n - 120.0) / 200.0) * ((n - 120.0) / 200.0)
        + 0.002 * ripple * ripple)
}

fn check_dims(space: &SearchSpace, candidate: &[f64]) -> Result<(), ObjectiveError> {
    if candidate.len() != space.dims() {
        return Err(ObjectiveError::Dimension {
            expected: space.dims(),
            got: candidate.len(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Rastrigin {
    space: SearchSpace,
}

impl Rastrigin {
    pub fn new(dims: usize) -> Self {
        Rastrigin {
            space: SearchSpace::rastrigin(dims),
        }
    }
}

impl Objective for Rastrigin {
    fn space(&self) -> &SearchSpace {
        &self.space
    }

    fn evaluate(&self, candidate: &[f64]) -> Result<f64, ObjectiveError> {
        check_dims(&self.space, candidate)?;
        rastrigin(candidate)
    }

    fn reentrant(&self) -> bool {
        true
    }
}

/// [`synthetic_landscape`] over [`SearchSpace::neurons_layers`].
#[derive(Debug, Clone)]
pub struct SyntheticLandscape {
    space: SearchSpace,
}

impl Default for SyntheticLandscape {
    fn default() -> Self {
        SyntheticLandscape {
            space: SearchSpace::neurons_layers(),
        }
    }
}

impl Objective for SyntheticLandscape {
    fn space(&self) -> &SearchSpace {
        &self.space
    }

    fn evaluate(&self, candidate: &[f64]) -> Result<f64, ObjectiveError> {
        check_dims(&self.space, candidate)?;
        for (axis, v) in candidate.iter().enumerate() {
            if libm::trunc(*v) != *v {
                return Err(ObjectiveError::Domain { axis, value: *v });
            }
        }
        synthetic_landscape(candidate[1] as i64, candidate[0] as i64)
    }

    fn reentrant(&self) -> bool {
        true
    }
}

/// Wraps an objective and counts candidate evaluations.
#[derive(Debug)]
pub struct Counted<O> {
    inner: O,
    count: AtomicUsize,
}

impl<O> Counted<O> {
    pub fn new(inner: O) -> Self {
        Counted {
            inner,
            count: AtomicUsize::new(0),
        }
    }

    pub fn eval_count(&self) -> usize {
        self.count.load(Ordering::Relaxed)
    }

    pub fn into_inner(self) -> O {
        self.inner
    }
}

impl<O: Objective> Objective for Counted<O> {
    fn space(&self) -> &SearchSpace {
        self.inner.space()
    }

    fn evaluate(&self, candidate: &[f64]) -> Result<f64, ObjectiveError> {
        self.count.fetch_add(1, Ordering::Relaxed);
        self.inner.evaluate(candidate)
    }

    fn reentrant(&self) -> bool {
        self.inner.reentrant()
    }

    fn evaluate_batch(&self, batch: &[Vec<f64>]) -> Result<Vec<f64>, BatchError> {
        self.count.fetch_add(batch.len(), Ordering::Relaxed);
        self.inner.evaluate_batch(batch)
    }
}

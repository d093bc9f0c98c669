use llm_pso_core::{BatchError, Objective, ObjectiveError, SearchSpace};
use rayon::prelude::*;

/// Evaluates batches on the rayon pool when the inner objective is
/// reentrant, serially otherwise. Results keep candidate order and the
/// reported error is the lowest failing index.
#[derive(Debug)]
pub struct Parallel<O>(pub O);

impl<O: Objective + Sync> Objective for Parallel<O> {
    fn space(&self) -> &SearchSpace {
        self.0.space()
    }

    fn evaluate(&self, candidate: &[f64]) -> Result<f64, ObjectiveError> {
        self.0.evaluate(candidate)
    }

    fn reentrant(&self) -> bool {
        self.0.reentrant()
    }

    fn evaluate_batch(&self, batch: &[Vec<f64>]) -> Result<Vec<f64>, BatchError> {
        if !self.0.reentrant() || batch.len() < 2 {
            return self.0.evaluate_batch(batch);
        }
        let results: Vec<Result<f64, ObjectiveError>> = batch.par_iter().map(|c| self.0.evaluate(c)).collect();
        results
            .into_iter()
            .enumerate()
            .map(|(index, r)| r.map_err(|source| BatchError { index, source }))
            .collect()
    }
}

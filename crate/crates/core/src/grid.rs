//! Exhaustive scan of an all-integer search space.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, RunError};
use crate::objective::Objective;
use crate::swarm::evaluate_checked;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMinimum {
    pub position: Vec<f64>,
    pub cost: f64,
    pub points: usize,
}

/// Every integer point of the objective's space, first axis slowest.
pub fn grid_points<O: Objective + ?Sized>(objective: &O) -> Result<Vec<Vec<f64>>, ConfigError> {
    let space = objective.space();
    space.validate()?;
    if let Some(a) = space.axes.iter().find(|a| !a.integral) {
        return Err(ConfigError::InvalidAxis {
            axis: a.name.clone(),
            reason: "grid scan needs integral axes",
        });
    }
    let mut points: Vec<Vec<f64>> = alloc::vec![Vec::new()];
    for axis in &space.axes {
        let (lo, hi) = (axis.min as i64, axis.max as i64);
        points = points
            .into_iter()
            .flat_map(|prefix| {
                (lo..=hi).map(move |v| {
                    let mut p = prefix.clone();
                    p.push(v as f64);
                    p
                })
            })
            .collect();
    }
    Ok(points)
}

/// Evaluate every grid point and return the lowest cost (first on ties).
pub fn eval_grid<O: Objective + ?Sized>(objective: &O) -> Result<GridMinimum, RunError> {
    let points = grid_points(objective)?;
    let costs = evaluate_checked(objective, &points).map_err(|e| RunError::Objective {
        iteration: 0,
        particle: e.index,
        during_injection: false,
        source: e.source,
    })?;
    let (best, cost) = costs
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bc), (i, &c)| if c < bc { (i, c) } else { (bi, bc) });
    Ok(GridMinimum {
        position: points[best].clone(),
        cost,
        points: points.len(),
    })
}

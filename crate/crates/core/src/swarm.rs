//! Swarm state and the canonical velocity/position update.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{BatchError, ConfigError, ObjectiveError, StepError};
use crate::objective::Objective;
use crate::space::SearchSpace;
use crate::SwarmRng;

/// Inertia weight and acceleration coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientConfig {
    /// Inertia weight.
    pub w: f64,
    /// Pull toward the particle's own best (exploration).
    pub c1: f64,
    /// Pull toward the swarm's best (exploitation).
    pub c2: f64,
}

impl Default for CoefficientConfig {
    fn default() -> Self {
        CoefficientConfig {
            w: 0.7,
            c1: 0.5,
            c2: 0.5,
        }
    }
}

impl CoefficientConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if !ok(self.w) {
            return Err(ConfigError::InvalidCoefficients("w must be finite and >= 0"));
        }
        if !ok(self.c1) || !ok(self.c2) {
            return Err(ConfigError::InvalidCoefficients("c1 and c2 must be finite and >= 0"));
        }
        Ok(())
    }
}

/// How the random factors `r1`, `r2` are drawn in a velocity update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RandomDraws {
    /// Fresh `r1`, `r2` for every axis.
    #[default]
    PerAxis,
    /// One `r1`, `r2` pair per particle, shared by all axes.
    PerParticle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwarmConfig {
    pub pop_size: usize,
    pub coefficients: CoefficientConfig,
    #[serde(default)]
    pub random_draws: RandomDraws,
}

impl SwarmConfig {
    pub fn new(pop_size: usize, coefficients: CoefficientConfig) -> Self {
        SwarmConfig {
            pop_size,
            coefficients,
            random_draws: RandomDraws::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    /// Cost at `position`; `+inf` until first evaluated.
    pub current_cost: f64,
    pub pbest_position: Vec<f64>,
    pub pbest_cost: f64,
    pub evaluated: bool,
}

impl Particle {
    /// Record a fresh evaluation of `position`, moving pbest if it improved.
    fn observe(&mut self, cost: f64) {
        self.current_cost = cost;
        if !self.evaluated || cost < self.pbest_cost {
            self.pbest_cost = cost;
            self.pbest_position.clone_from(&self.position);
        }
        self.evaluated = true;
    }
}

/// Summary of one batch of particle evaluations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    /// Swarm iteration after the batch (0 for the initial evaluation).
    pub iteration: usize,
    pub costs: Vec<f64>,
    pub evaluations: usize,
    pub gbest_cost: f64,
    pub improved: bool,
}

/// A seeded swarm. One run owns one swarm.
#[derive(Debug, Clone)]
pub struct Swarm {
    pub(crate) particles: Vec<Particle>,
    pub(crate) gbest_position: Vec<f64>,
    pub(crate) gbest_cost: f64,
    pub(crate) iteration: usize,
    pub(crate) rng: SwarmRng,
    pub(crate) space: SearchSpace,
    pub(crate) config: SwarmConfig,
}

/// Draw a fresh swarm: uniform positions (rounded on integral axes) and
/// uniform velocities in `±v_max`. Costs are left unevaluated.
pub fn initialize_swarm(
    config: &SwarmConfig,
    space: &SearchSpace,
    seed: u64,
) -> Result<Swarm, ConfigError> {
    if config.pop_size == 0 {
        return Err(ConfigError::EmptySwarm);
    }
    space.validate()?;
    config.coefficients.validate()?;

    let mut rng = SwarmRng::seed_from_u64(seed);
    let particles = (0..config.pop_size)
        .map(|_| {
            let position: Vec<f64> = space
                .axes
                .iter()
                .map(|a| {
                    let x = rng.random_range(a.min..=a.max);
                    if a.integral {
                        libm::round(x)
                    } else {
                        x
                    }
                })
                .collect();
            let velocity = space
                .axes
                .iter()
                .map(|a| rng.random_range(-a.v_max..=a.v_max))
                .collect();
            Particle {
                pbest_position: position.clone(),
                position,
                velocity,
                current_cost: f64::INFINITY,
                pbest_cost: f64::INFINITY,
                evaluated: false,
            }
        })
        .collect();

    Ok(Swarm {
        particles,
        gbest_position: Vec::new(),
        gbest_cost: f64::INFINITY,
        iteration: 0,
        rng,
        space: space.clone(),
        config: config.clone(),
    })
}

/// Velocity update with the random factors supplied by the caller:
/// `w·v + c1·r1·(pbest − x) + c2·r2·(gbest − x)`, clamped to `±v_max`.
pub fn velocity_from_draws(
    particle: &Particle,
    gbest: &[f64],
    coeffs: &CoefficientConfig,
    space: &SearchSpace,
    r1: &[f64],
    r2: &[f64],
) -> Vec<f64> {
    space
        .axes
        .iter()
        .enumerate()
        .map(|(k, axis)| {
            let x = particle.position[k];
            let raw = coeffs.w * particle.velocity[k]
                + coeffs.c1 * r1[k] * (particle.pbest_position[k] - x)
                + coeffs.c2 * r2[k] * (gbest[k] - x);
            axis.clamp_velocity(raw)
        })
        .collect()
}

/// Velocity update drawing `r1`, `r2 ~ U[0, 1]` from `rng`.
pub fn update_velocity<R: Rng + ?Sized>(
    particle: &Particle,
    gbest: &[f64],
    coeffs: &CoefficientConfig,
    space: &SearchSpace,
    draws: RandomDraws,
    rng: &mut R,
) -> Vec<f64> {
    let dims = space.dims();
    let (r1, r2): (Vec<f64>, Vec<f64>) = match draws {
        RandomDraws::PerAxis => (0..dims).map(|_| (rng.random::<f64>(), rng.random::<f64>())).unzip(),
        RandomDraws::PerParticle => {
            let (a, b): (f64, f64) = (rng.random(), rng.random());
            (alloc::vec![a; dims], alloc::vec![b; dims])
        }
    };
    velocity_from_draws(particle, gbest, coeffs, space, &r1, &r2)
}

/// `x + v`, clipped into bounds. Velocity is kept as-is at the boundary.
pub fn update_position(position: &[f64], velocity: &[f64], space: &SearchSpace) -> Vec<f64> {
    let mut next: Vec<f64> = position.iter().zip(velocity).map(|(x, v)| x + v).collect();
    space.project(&mut next);
    next
}

/// Batch evaluation that rejects non-finite costs.
pub(crate) fn evaluate_checked<O: Objective + ?Sized>(
    objective: &O,
    batch: &[Vec<f64>],
) -> Result<Vec<f64>, BatchError> {
    let costs = objective.evaluate_batch(batch)?;
    if costs.len() != batch.len() {
        return Err(BatchError {
            index: costs.len().min(batch.len().saturating_sub(1)),
            source: ObjectiveError::Evaluation(alloc::format!(
                "batch of {} produced {} costs",
                batch.len(),
                costs.len()
            )),
        });
    }
    if let Some(index) = costs.iter().position(|c| !c.is_finite()) {
        return Err(BatchError {
            index,
            source: ObjectiveError::NonFinite {
                value: costs[index],
            },
        });
    }
    Ok(costs)
}

impl Swarm {
    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn gbest_position(&self) -> &[f64] {
        &self.gbest_position
    }

    pub fn gbest_cost(&self) -> f64 {
        self.gbest_cost
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn config(&self) -> &SwarmConfig {
        &self.config
    }

    pub fn pop_size(&self) -> usize {
        self.particles.len()
    }

    pub fn is_evaluated(&self) -> bool {
        self.particles.iter().all(|p| p.evaluated)
    }

    /// Evaluation points (rounded) for every particle's current position.
    pub fn candidates(&self) -> Vec<Vec<f64>> {
        self.particles
            .iter()
            .map(|p| self.space.evaluation_point(&p.position))
            .collect()
    }

    /// Evaluate the freshly initialized swarm and set pbest/gbest.
    pub fn evaluate_initial<O: Objective + ?Sized>(
        &mut self,
        objective: &O,
    ) -> Result<StepReport, StepError> {
        let costs = evaluate_checked(objective, &self.candidates())?;
        Ok(self.absorb(costs))
    }

    /// One synchronous PSO iteration: update every velocity and position
    /// against the gbest from the start of the iteration, evaluate the whole
    /// swarm as one batch, then update pbest/gbest in particle order.
    ///
    /// On evaluation failure the swarm (including its RNG) is restored to
    /// its pre-step state.
    ///
    /// # Panics
    /// If the swarm has not been evaluated yet.
    pub fn step<O: Objective + ?Sized>(&mut self, objective: &O) -> Result<StepReport, StepError> {
        assert!(
            self.is_evaluated(),
            "Swarm::step called before evaluate_initial"
        );
        let snapshot = self.clone();
        let coeffs = self.config.coefficients;
        let draws = self.config.random_draws;
        for p in &mut self.particles {
            let v = update_velocity(p, &self.gbest_position, &coeffs, &self.space, draws, &mut self.rng);
            p.position = update_position(&p.position, &v, &self.space);
            p.velocity = v;
        }
        match evaluate_checked(objective, &self.candidates()) {
            Ok(costs) => {
                self.iteration += 1;
                Ok(self.absorb(costs))
            }
            Err(e) => {
                *self = snapshot;
                Err(e.into())
            }
        }
    }

    fn absorb(&mut self, costs: Vec<f64>) -> StepReport {
        let before = self.gbest_cost;
        for (p, &cost) in self.particles.iter_mut().zip(&costs) {
            p.observe(cost);
            if p.pbest_cost < self.gbest_cost {
                self.gbest_cost = p.pbest_cost;
                self.gbest_position.clone_from(&p.pbest_position);
            }
        }
        StepReport {
            iteration: self.iteration,
            evaluations: costs.len(),
            gbest_cost: self.gbest_cost,
            improved: self.gbest_cost < before,
            costs,
        }
    }

    /// Overwrite particle `index` with an externally supplied state whose
    /// cost is already known. pbest restarts at the new state; gbest moves
    /// only if the new cost beats it.
    pub(crate) fn replace_particle(
        &mut self,
        index: usize,
        position: Vec<f64>,
        velocity: Vec<f64>,
        cost: f64,
    ) {
        let p = &mut self.particles[index];
        p.pbest_position.clone_from(&position);
        p.position = position;
        p.velocity = velocity;
        p.current_cost = cost;
        p.pbest_cost = cost;
        p.evaluated = true;
        if cost < self.gbest_cost {
            self.gbest_cost = cost;
            self.gbest_position.clone_from(&self.particles[index].position);
        }
    }
}

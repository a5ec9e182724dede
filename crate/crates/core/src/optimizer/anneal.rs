//! SAGRAPE: annealing cycles interleaved with capped GRAPE passes.

use alloc::vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::grape::{finish, grape, invalid, GrapeOptions};
use super::objective::{objective_value, Objective};
use super::OptimizationResult;
use crate::error::{Error, Result};
use crate::problem::{ControlField, DiscriminationProblem};

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AnnealOptions {
    pub initial_temperature: f64,
    /// Cooling factor α in `T ← αT`.
    pub cooling: f64,
    /// Proposals per annealing cycle (κ).
    pub steps: usize,
    /// Half-width of the uniform perturbation applied to every amplitude.
    pub sigma: f64,
    /// GRAPE iterations allowed after each annealing cycle.
    pub grape_iterations: usize,
    pub seed: u64,
}

impl Default for AnnealOptions {
    fn default() -> Self {
        Self { initial_temperature: 0.02, cooling: 0.9, steps: 50, sigma: 0.1, grape_iterations: 50, seed: 0 }
    }
}

impl AnnealOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_temperature > 0.0 && self.initial_temperature.is_finite()) {
            return Err(invalid("initial_temperature", "must be positive"));
        }
        if !(self.cooling > 0.0 && self.cooling < 1.0) {
            return Err(invalid("cooling", "must lie in (0, 1)"));
        }
        if self.steps == 0 {
            return Err(invalid("steps", "must be at least 1"));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(invalid("sigma", "must be non-negative"));
        }
        if self.grape_iterations == 0 {
            return Err(invalid("grape_iterations", "must be at least 1"));
        }
        Ok(())
    }
}

/// Threshold acceptance: a change `delta` passes at temperature `t` when
/// `delta ≥ −min(1, t·exp(delta/t))`.
pub fn accept(delta: f64, temperature: f64) -> bool {
    let threshold = -(temperature * (delta / temperature).exp()).min(1.0);
    delta >= threshold
}

pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Simulated-annealing GRAPE from `init`, returning the best iterate seen.
pub fn sagrape(
    problem: &DiscriminationProblem,
    objective: &Objective,
    init: &ControlField,
    grape_options: &GrapeOptions,
    anneal: &AnnealOptions,
) -> Result<OptimizationResult> {
    sagrape_on_stream(problem, objective, init, grape_options, anneal, 1)
}

pub(crate) fn sagrape_on_stream(
    problem: &DiscriminationProblem,
    objective: &Objective,
    init: &ControlField,
    grape_options: &GrapeOptions,
    anneal: &AnnealOptions,
    stream: u64,
) -> Result<OptimizationResult> {
    grape_options.validate()?;
    anneal.validate()?;
    problem.check_controls(init)?;
    let mut rng = rng_for(anneal.seed, stream);

    let mut u = init.clone();
    super::grape::clamp_field(&mut u, grape_options.amplitude_bound);
    let mut f = objective_value(problem, &u, objective)?;
    if !f.is_finite() {
        return Err(Error::NonFiniteObjective { iteration: 0 });
    }
    let (mut best, mut f_best) = (u.clone(), f);
    let mut trace = vec![f];
    let mut iterations = 0;
    let mut converged = false;
    let mut proposal = u.clone();

    while iterations < grape_options.max_iterations {
        let f_cycle_start = f_best;
        let mut temperature = anneal.initial_temperature;
        for _ in 0..anneal.steps {
            for (p, base) in proposal.values_mut().iter_mut().zip(u.values()) {
                *p = base + rng.gen_range(-anneal.sigma..=anneal.sigma);
            }
            super::grape::clamp_field(&mut proposal, grape_options.amplitude_bound);
            let f_new = objective_value(problem, &proposal, objective)?;
            if !f_new.is_finite() {
                return Err(Error::NonFiniteObjective { iteration: iterations });
            }
            if accept(f_new - f, temperature) {
                core::mem::swap(&mut u, &mut proposal);
                f = f_new;
                if f > f_best {
                    best.clone_from(&u);
                    f_best = f;
                }
            }
            temperature *= anneal.cooling;
        }
        trace.push(f);

        let budget = anneal.grape_iterations.min(grape_options.max_iterations - iterations);
        let pass = grape(problem, objective, &u, &GrapeOptions { max_iterations: budget, ..*grape_options })?;
        trace.extend_from_slice(&pass.trace[1..]);
        iterations += pass.iterations.max(1);
        u = pass.controls;
        f = pass.objective;
        if f > f_best {
            best.clone_from(&u);
            f_best = f;
        }
        if f_best - f_cycle_start < grape_options.threshold {
            converged = true;
            break;
        }
    }
    finish(problem, best, f_best, trace, iterations, converged, anneal.seed)
}

//! Pulse optimization: objectives and their gradients, GRAPE, SAGRAPE and
//! best-of-R restarts.

mod anneal;
mod grape;
mod objective;

use alloc::vec::Vec;

use rand::Rng;

pub use anneal::{accept, sagrape, AnnealOptions};
pub use grape::{grape, GrapeOptions, LineSearchOptions};
pub use objective::{
    final_errors, finite_difference_gradient, max_relative_error, objective_gradient, objective_value,
    value_and_gradient, DetuningEnsemble, Figure, GradientMode, Objective,
};

use crate::error::Result;
use crate::problem::{ControlField, DiscriminationProblem};

/// Outcome of one optimization run.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OptimizationResult {
    pub controls: ControlField,
    /// Objective after every iteration, starting with the initial value.
    pub trace: Vec<f64>,
    pub objective: f64,
    pub helstrom_error: f64,
    pub fixed_local_error: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Filled in by callers that own a clock.
    #[cfg_attr(feature = "serde", serde(skip))]
    pub wall_clock_seconds: Option<f64>,
    pub seed: u64,
    /// Which restart produced this result; `None` for the zero-pulse candidate.
    pub restart: Option<usize>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Method {
    #[default]
    Grape,
    Sagrape,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RestartOptions {
    pub restarts: usize,
    /// Constant amplitude of the first start.
    pub initial_amplitude: f64,
    /// Later starts draw every amplitude uniformly from `[-a, a]`.
    pub random_amplitude: f64,
    /// Also consider the zero pulse as a candidate answer.
    pub include_zero: bool,
}

impl Default for RestartOptions {
    fn default() -> Self {
        Self { restarts: 1, initial_amplitude: 0.01, random_amplitude: 1.0, include_zero: false }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OptimizeOptions {
    pub method: Method,
    pub grape: GrapeOptions,
    pub anneal: AnnealOptions,
    pub restarts: RestartOptions,
}

impl OptimizeOptions {
    pub fn validate(&self) -> Result<()> {
        self.grape.validate()?;
        if self.method == Method::Sagrape {
            self.anneal.validate()?;
        }
        let r = &self.restarts;
        if r.restarts == 0 {
            return Err(grape::invalid("restarts", "must be at least 1"));
        }
        if !(r.initial_amplitude.is_finite() && r.random_amplitude >= 0.0 && r.random_amplitude.is_finite()) {
            return Err(grape::invalid("restarts", "amplitudes must be finite"));
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        match self.method {
            Method::Grape => self.grape.seed,
            Method::Sagrape => self.anneal.seed,
        }
    }
}

/// Starting field of restart `r`; each restart owns its own random stream.
pub fn initial_controls(problem: &DiscriminationProblem, options: &OptimizeOptions, restart: usize) -> ControlField {
    let r = &options.restarts;
    let mut u = problem.constant_controls(r.initial_amplitude);
    if restart > 0 {
        let mut rng = anneal::rng_for(options.seed(), 2 * restart as u64);
        let a = r.random_amplitude;
        for v in u.values_mut() {
            *v = if a > 0.0 { rng.gen_range(-a..=a) } else { 0.0 };
        }
    }
    u
}

/// One restart of the configured method. Independent restarts may run in
/// any order or in parallel and give the same results.
pub fn run_restart(
    problem: &DiscriminationProblem,
    objective: &Objective,
    options: &OptimizeOptions,
    restart: usize,
) -> Result<OptimizationResult> {
    let init = initial_controls(problem, options, restart);
    let mut result = match options.method {
        Method::Grape => grape(problem, objective, &init, &options.grape)?,
        Method::Sagrape => anneal::sagrape_on_stream(
            problem,
            objective,
            &init,
            &options.grape,
            &options.anneal,
            2 * restart as u64 + 1,
        )?,
    };
    result.restart = Some(restart);
    Ok(result)
}

/// The zero pulse scored as a finished candidate.
pub fn zero_candidate(
    problem: &DiscriminationProblem,
    objective: &Objective,
    options: &OptimizeOptions,
) -> Result<OptimizationResult> {
    let u = problem.zero_controls();
    let f = objective_value(problem, &u, objective)?;
    let mut r = grape::finish(problem, u, f, alloc::vec![f], 0, true, options.seed())?;
    r.restart = None;
    Ok(r)
}

/// Highest objective wins; ties go to the earliest candidate.
pub fn select_best(candidates: impl IntoIterator<Item = OptimizationResult>) -> Option<OptimizationResult> {
    candidates.into_iter().fold(None, |best: Option<OptimizationResult>, c| match best {
        Some(b) if b.objective >= c.objective => Some(b),
        _ => Some(c),
    })
}

/// Best of all configured restarts, run sequentially.
pub fn optimize(
    problem: &DiscriminationProblem,
    objective: &Objective,
    options: &OptimizeOptions,
) -> Result<OptimizationResult> {
    options.validate()?;
    let mut results = Vec::with_capacity(options.restarts.restarts + 1);
    for r in 0..options.restarts.restarts {
        results.push(run_restart(problem, objective, options, r)?);
    }
    if options.restarts.include_zero {
        results.push(zero_candidate(problem, objective, options)?);
    }
    Ok(select_best(results).expect("at least one restart"))
}

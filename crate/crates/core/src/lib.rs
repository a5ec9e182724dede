//! Controlled binary hypothesis testing on a single noisy qubit.
//!
//! Two hypotheses, `H₀ = 0` and `H₁ = (1+dω)σ_z`, drive the same initial
//! state through a Lindblad master equation with piecewise-constant controls.
//! The crate propagates both, scores how well the final states can be told
//! apart, and shapes the controls with gradient ascent (GRAPE) or its
//! annealing hybrid (SAGRAPE), optionally averaged over a detuning window.
//!
//! ```
//! use qht_core::{make_problem, optimize, Measurement, NoiseModel, Objective, OptimizeOptions};
//!
//! let problem = make_problem(NoiseModel::parallel(0.1), 2.0, 40, 0.0, Measurement::Helstrom).unwrap();
//! let mut options = OptimizeOptions::default();
//! options.grape.max_iterations = 20;
//! let result = optimize(&problem, &Objective::hilbert_schmidt(), &options).unwrap();
//! assert!(result.helstrom_error < 0.5);
//! ```

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod discrimination;
pub mod error;
pub mod linalg;
pub mod optimizer;
pub mod problem;
pub mod propagation;
pub mod quantum;
pub mod scenarios;

pub use discrimination::{
    averaged_error, fixed_local_error, helstrom_error, helstrom_povm, hs_objective, trace_distance, Povm, Priors,
};
pub use error::{Error, Result};
pub use optimizer::{
    grape, optimize, sagrape, AnnealOptions, DetuningEnsemble, GradientMode, GrapeOptions, Method, Objective,
    OptimizationResult, OptimizeOptions, RestartOptions,
};
pub use problem::{ControlField, DiscriminationProblem, Measurement, TimeGrid};
pub use propagation::{evolve, Trajectory};
pub use quantum::{BlochVector, DensityMatrix};
pub use scenarios::{make_problem, uncontrolled_error, NoiseKind, NoiseModel};

//! Figures of merit and their gradients with respect to the control amplitudes.
//!
//! Every objective is expressed as a score to be maximized: the
//! Hilbert–Schmidt surrogate `D`, or `−P_e` for a fixed measurement.
//! Gradients use one forward sweep storing the per-slice propagators and
//! their control derivatives, then one backward sweep of the co-state
//! `λ_n = (e^{ΔtL_n}…e^{ΔtL_{N−1}})† c`, so the cost is linear in the number
//! of slices.

use alloc::vec;
use alloc::vec::Vec;


use crate::discrimination::{check_weights, fixed_local_error, helstrom_error, hs_objective, Povm, Priors};
use crate::error::{Error, Result};
use crate::linalg::{expm, BlockPair, Mat4, C64, ZERO};
use crate::problem::{ControlField, DiscriminationProblem, Measurement};
use crate::propagation::{evolve_detuned, slice_generators, truncated_series};
use crate::quantum::{vectorize, DensityMatrix, Superoperator};

/// The functional of the two final states being maximized.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Figure {
    /// `D = ½ tr[(ρ₀−ρ₁)²]`, a smooth stand-in for the Helstrom error.
    HilbertSchmidt,
    /// `−P_e` for a fixed two-outcome measurement.
    FixedLocal { povm: Povm, priors: Priors },
}

/// Detuning samples `dω_s` with quadrature weights summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct DetuningEnsemble {
    samples: Vec<f64>,
    weights: Vec<f64>,
}

impl DetuningEnsemble {
    pub fn new(samples: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidWeights { reason: "ensemble needs at least one sample" });
        }
        if samples.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                what: "ensemble weights",
                expected: samples.len(),
                found: weights.len(),
            });
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite { what: "detuning samples" });
        }
        check_weights(&weights)?;
        Ok(Self { samples, weights })
    }

    fn grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
        if count == 0 || !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidOption {
                option: "window",
                reason: alloc::format!("need lo <= hi and at least one sample, got [{lo}, {hi}] x {count}"),
            });
        }
        if count == 1 {
            return Ok(vec![0.5 * (lo + hi)]);
        }
        let step = (hi - lo) / (count - 1) as f64;
        Ok((0..count).map(|i| if i + 1 == count { hi } else { lo + step * i as f64 }).collect())
    }

    /// `count` evenly spaced points over `[lo, hi]`, equal weights.
    pub fn uniform(lo: f64, hi: f64, count: usize) -> Result<Self> {
        let samples = Self::grid(lo, hi, count)?;
        let weights = vec![1.0 / count as f64; count];
        Self::new(samples, weights)
    }

    /// Same points with trapezoidal weights.
    pub fn trapezoid(lo: f64, hi: f64, count: usize) -> Result<Self> {
        let samples = Self::grid(lo, hi, count)?;
        if count == 1 {
            return Self::new(samples, vec![1.0]);
        }
        let inner = 1.0 / (count - 1) as f64;
        let weights = (0..count)
            .map(|i| if i == 0 || i + 1 == count { 0.5 * inner } else { inner })
            .collect();
        Self::new(samples, weights)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// A figure of merit, optionally averaged over signal detunings.
#[derive(Clone, Debug, PartialEq)]
pub struct Objective {
    figure: Figure,
    ensemble: Option<DetuningEnsemble>,
}

impl Objective {
    pub fn hilbert_schmidt() -> Self {
        Self { figure: Figure::HilbertSchmidt, ensemble: None }
    }

    pub fn fixed_local(povm: Povm, priors: Priors) -> Self {
        Self { figure: Figure::FixedLocal { povm, priors }, ensemble: None }
    }

    /// `D` for a Helstrom measurement, `−P_e` for a fixed one.
    pub fn for_measurement(measurement: &Measurement) -> Self {
        match measurement {
            Measurement::Helstrom => Self::hilbert_schmidt(),
            Measurement::FixedLocal { povm, priors } => Self::fixed_local(*povm, *priors),
        }
    }

    /// Average over `ensemble`, replacing the problem's own detuning.
    pub fn robust(self, ensemble: DetuningEnsemble) -> Self {
        Self { ensemble: Some(ensemble), ..self }
    }

    pub fn figure(&self) -> &Figure {
        &self.figure
    }

    pub fn ensemble(&self) -> Option<&DetuningEnsemble> {
        self.ensemble.as_ref()
    }

    pub fn is_robust(&self) -> bool {
        self.ensemble.is_some()
    }

    fn samples(&self, problem: &DiscriminationProblem) -> (Vec<f64>, Vec<f64>) {
        match &self.ensemble {
            Some(e) => (e.samples.clone(), e.weights.clone()),
            None => (vec![problem.detuning()], vec![1.0]),
        }
    }
}

/// Which per-slice propagator derivative drives the gradient.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum GradientMode {
    /// Augmented block exponential.
    #[default]
    Exact,
    /// Second-order series in `Δt`.
    Truncated,
}

fn figure_value(figure: &Figure, rho0: &DensityMatrix, rho1: &DensityMatrix) -> f64 {
    match figure {
        Figure::HilbertSchmidt => hs_objective(rho0, rho1),
        Figure::FixedLocal { povm, priors } => -fixed_local_error(rho0, rho1, povm, priors),
    }
}

/// Co-states `(c₀, c₁)` with `dF = Re⟨c₀, d vec ρ₀⟩ + Re⟨c₁, d vec ρ₁⟩`.
fn figure_costates(figure: &Figure, rho0: &DensityMatrix, rho1: &DensityMatrix) -> ([C64; 4], [C64; 4]) {
    match figure {
        Figure::HilbertSchmidt => {
            let diff = vectorize(&(*rho0.matrix() - *rho1.matrix()));
            (diff, diff.map(|z| -z))
        }
        Figure::FixedLocal { povm, priors } => {
            // tr(ρE) = ⟨vec E, vec ρ⟩ for Hermitian E.
            let c0 = vectorize(povm.e1()).map(|z| z * -priors.p0());
            let c1 = vectorize(povm.e0()).map(|z| z * -priors.p1());
            (c0, c1)
        }
    }
}

/// Score being maximized: `D` or `−P_e`, weighted over the ensemble if any.
pub fn objective_value(problem: &DiscriminationProblem, controls: &ControlField, objective: &Objective) -> Result<f64> {
    let (samples, weights) = objective.samples(problem);
    let (rho0, _) = evolve_detuned(problem, 0, problem.detuning(), controls, false)?;
    let mut total = 0.0;
    for (d, w) in samples.iter().zip(&weights) {
        let (rho1, _) = evolve_detuned(problem, 1, *d, controls, false)?;
        total += w * figure_value(&objective.figure, &rho0, &rho1);
    }
    Ok(total)
}

/// Helstrom and fixed-local errors at the problem's own detuning.
pub fn final_errors(problem: &DiscriminationProblem, controls: &ControlField) -> Result<(f64, f64)> {
    let (rho0, _) = evolve_detuned(problem, 0, problem.detuning(), controls, false)?;
    let (rho1, _) = evolve_detuned(problem, 1, problem.detuning(), controls, false)?;
    let (povm, priors) = match problem.measurement() {
        Measurement::FixedLocal { povm, priors } => (*povm, *priors),
        Measurement::Helstrom => (Povm::plus_minus(), Priors::symmetric()),
    };
    Ok((helstrom_error(&rho0, &rho1), fixed_local_error(&rho0, &rho1, &povm, &priors)))
}

/// Forward sweep keeping everything the backward sweep needs.
struct Sweep {
    /// `vec ρ` after `n` slices, `n = 0..=N`.
    states: Vec<[C64; 4]>,
    propagators: Vec<Mat4>,
    /// `∂e^{ΔtL_n}/∂u_{k,n}` at index `n·K + k`.
    derivatives: Vec<Mat4>,
}

fn forward_sweep(
    problem: &DiscriminationProblem,
    hypothesis: usize,
    detuning: f64,
    controls: &ControlField,
    mode: GradientMode,
    control_terms: &[Superoperator],
) -> Result<Sweep> {
    let generators = slice_generators(problem, hypothesis, detuning, controls)?;
    let dt = problem.grid().dt();
    let n_slices = generators.len();
    let k_channels = control_terms.len();
    let mut states = Vec::with_capacity(n_slices + 1);
    let mut propagators = Vec::with_capacity(n_slices);
    let mut derivatives = Vec::with_capacity(n_slices * k_channels);
    let mut v = problem.initial().vec();
    states.push(v);
    for l in &generators {
        if !l.matrix().is_finite() {
            return Err(Error::NonFinite { what: "generator" });
        }
        let a = l.matrix().scale_real(dt);
        let propagator = match mode {
            GradientMode::Exact => {
                let mut p = None;
                for term in control_terms {
                    let block = expm(&BlockPair { diag: a, upper: term.matrix().scale_real(dt) });
                    derivatives.push(block.upper);
                    p.get_or_insert(block.diag);
                }
                p.unwrap_or_else(|| a.expm())
            }
            GradientMode::Truncated => {
                let p = a.expm();
                for term in control_terms {
                    derivatives.push(truncated_series(l, term, dt) * p);
                }
                p
            }
        };
        v = propagator.mul_vec(&v);
        states.push(v);
        propagators.push(propagator);
    }
    Ok(Sweep { states, propagators, derivatives })
}

/// Adds `Re⟨λ_{n+1}, ∂P_n v_n⟩` into `grad[k][n]`, scaled by `scale`.
fn backward_sweep(sweep: &Sweep, costate: [C64; 4], k_channels: usize, n_slices: usize, grad: &mut [f64]) {
    let mut lambda = costate;
    for n in (0..n_slices).rev() {
        let v = &sweep.states[n];
        for k in 0..k_channels {
            let dv = sweep.derivatives[n * k_channels + k].mul_vec(v);
            let inner: C64 = lambda.iter().zip(&dv).map(|(l, d)| l.conj() * d).sum();
            grad[k * n_slices + n] += inner.re;
        }
        lambda = sweep.propagators[n].adjoint_mul_vec(&lambda);
    }
}

/// `∂(score)/∂u_{k,n}` for every channel and slice.
pub fn objective_gradient(
    problem: &DiscriminationProblem,
    controls: &ControlField,
    objective: &Objective,
    mode: GradientMode,
) -> Result<ControlField> {
    Ok(value_and_gradient(problem, controls, objective, mode)?.1)
}

/// Score and gradient from a single pair of sweeps.
pub fn value_and_gradient(
    problem: &DiscriminationProblem,
    controls: &ControlField,
    objective: &Objective,
    mode: GradientMode,
) -> Result<(f64, ControlField)> {
    problem.check_controls(controls)?;
    let (samples, weights) = objective.samples(problem);
    let terms = problem.control_generators();
    let (k_channels, n_slices) = (controls.channels(), controls.slices());
    let mut grad = vec![0.0; k_channels * n_slices];

    let null = forward_sweep(problem, 0, problem.detuning(), controls, mode, &terms)?;
    let rho0 = DensityMatrix::from_vec(&null.states[n_slices]);
    let mut null_costate = [ZERO; 4];
    let mut value = 0.0;
    for (d, w) in samples.iter().zip(&weights) {
        let alt = forward_sweep(problem, 1, *d, controls, mode, &terms)?;
        let rho1 = DensityMatrix::from_vec(&alt.states[n_slices]);
        value += w * figure_value(&objective.figure, &rho0, &rho1);
        let (c0, c1) = figure_costates(&objective.figure, &rho0, &rho1);
        for i in 0..4 {
            null_costate[i] += c0[i] * *w;
        }
        backward_sweep(&alt, c1.map(|z| z * *w), k_channels, n_slices, &mut grad);
    }
    backward_sweep(&null, null_costate, k_channels, n_slices, &mut grad);
    Ok((value, controls.with_values(grad)?))
}

/// Central differences of [`objective_value`] with step `step`.
pub fn finite_difference_gradient(
    problem: &DiscriminationProblem,
    controls: &ControlField,
    objective: &Objective,
    step: f64,
) -> Result<ControlField> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidOption { option: "step", reason: alloc::format!("{step} is not positive") });
    }
    problem.check_controls(controls)?;
    let mut grad = vec![0.0; controls.values().len()];
    let mut probe = controls.clone();
    for (i, g) in grad.iter_mut().enumerate() {
        let base = controls.values()[i];
        probe.values_mut()[i] = base + step;
        let up = objective_value(problem, &probe, objective)?;
        probe.values_mut()[i] = base - step;
        let down = objective_value(problem, &probe, objective)?;
        probe.values_mut()[i] = base;
        *g = (up - down) / (2.0 * step);
    }
    controls.with_values(grad)
}

/// `max |a − b| / max |b|`, the yardstick for gradient agreement.
pub fn max_relative_error(analytic: &ControlField, reference: &ControlField) -> f64 {
    let scale = reference.max_abs();
    let diff = analytic
        .values()
        .iter()
        .zip(reference.values())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::TimeGrid;
    use crate::quantum::{sigma_x, sigma_y, sigma_z, CollapseOperator, HermitianOperator, OperatorRole};
    use alloc::string::ToString;
    use core::f64::consts::PI;

    fn problem(gamma: f64, collapse: crate::linalg::Mat2, total_time: f64, slices: usize) -> DiscriminationProblem {
        DiscriminationProblem::new(
            HermitianOperator::zero(OperatorRole::Hypothesis),
            HermitianOperator::hypothesis(sigma_z()).unwrap(),
            0.0,
            vec![CollapseOperator::new(collapse, gamma / 2.0).unwrap()],
            vec![
                ("x".to_string(), HermitianOperator::control(sigma_x()).unwrap()),
                ("y".to_string(), HermitianOperator::control(sigma_y()).unwrap()),
            ],
            DensityMatrix::plus(),
            TimeGrid::new(total_time, slices).unwrap(),
            Measurement::Helstrom,
        )
        .unwrap()
    }

    fn wiggly(p: &DiscriminationProblem) -> ControlField {
        let mut u = p.zero_controls();
        for n in 0..u.slices() {
            let t = n as f64;
            u.set(0, n, 0.8 * (0.3 * t).sin() + 0.1);
            u.set(1, n, -0.5 * (0.17 * t + 1.0).cos());
        }
        u
    }

    #[test]
    fn free_quarter_period_maximizes_d() {
        let p = problem(0.0, sigma_z(), PI / 2.0, 20);
        let v = objective_value(&p, &p.zero_controls(), &Objective::hilbert_schmidt()).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let p = problem(0.0, sigma_z(), PI, 20);
        let v = objective_value(&p, &p.zero_controls(), &Objective::hilbert_schmidt()).unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn single_sample_ensemble_matches_plain_objective() {
        let p = problem(0.1, sigma_x(), 2.0, 40);
        let u = wiggly(&p);
        let plain = objective_value(&p, &u, &Objective::hilbert_schmidt()).unwrap();
        let robust = Objective::hilbert_schmidt().robust(DetuningEnsemble::uniform(0.0, 0.0, 1).unwrap());
        assert_eq!(objective_value(&p, &u, &robust).unwrap(), plain);
    }

    #[test]
    fn exact_gradient_matches_finite_differences() {
        for (collapse, objective) in [
            (sigma_z(), Objective::hilbert_schmidt()),
            (sigma_x(), Objective::fixed_local(Povm::plus_minus(), Priors::symmetric())),
            (sigma_x(), Objective::hilbert_schmidt().robust(DetuningEnsemble::uniform(-0.1, 0.1, 3).unwrap())),
        ] {
            let p = problem(0.2, collapse, 1.5, 30);
            let u = wiggly(&p);
            let analytic = objective_gradient(&p, &u, &objective, GradientMode::Exact).unwrap();
            let numeric = finite_difference_gradient(&p, &u, &objective, 1e-6).unwrap();
            let err = max_relative_error(&analytic, &numeric);
            assert!(err < 1e-6, "relative error {err}");
        }
    }

    #[test]
    fn value_and_gradient_value_matches_objective_value() {
        let p = problem(0.1, sigma_z(), 2.0, 40);
        let u = wiggly(&p);
        let obj = Objective::hilbert_schmidt().robust(DetuningEnsemble::uniform(-0.1, 0.1, 5).unwrap());
        let (v, _) = value_and_gradient(&p, &u, &obj, GradientMode::Exact).unwrap();
        assert!((v - objective_value(&p, &u, &obj).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn robust_gradient_is_weighted_mean() {
        let p = problem(0.1, sigma_x(), 2.0, 40);
        let u = wiggly(&p);
        let ens = DetuningEnsemble::uniform(-0.1, 0.1, 4).unwrap();
        let robust = objective_gradient(&p, &u, &Objective::hilbert_schmidt().robust(ens.clone()), GradientMode::Exact).unwrap();
        let mut mean = vec![0.0; robust.values().len()];
        for (d, w) in ens.samples().iter().zip(ens.weights()) {
            let g = objective_gradient(&p.with_detuning(*d), &u, &Objective::hilbert_schmidt(), GradientMode::Exact).unwrap();
            for (m, gi) in mean.iter_mut().zip(g.values()) {
                *m += w * gi;
            }
        }
        for (a, b) in robust.values().iter().zip(&mean) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn gradient_vanishes_without_control_hamiltonians() {
        let base = problem(0.1, sigma_z(), 1.0, 10);
        let p = DiscriminationProblem::new(
            HermitianOperator::zero(OperatorRole::Hypothesis),
            HermitianOperator::hypothesis(sigma_z()).unwrap(),
            0.0,
            base.collapses().to_vec(),
            vec![
                ("x".to_string(), HermitianOperator::zero(OperatorRole::Control)),
                ("y".to_string(), HermitianOperator::zero(OperatorRole::Control)),
            ],
            DensityMatrix::plus(),
            *base.grid(),
            Measurement::Helstrom,
        )
        .unwrap();
        let u = wiggly(&p);
        for mode in [GradientMode::Exact, GradientMode::Truncated] {
            let g = objective_gradient(&p, &u, &Objective::hilbert_schmidt(), mode).unwrap();
            assert_eq!(g.max_abs(), 0.0);
        }
        let fd = finite_difference_gradient(&p, &u, &Objective::hilbert_schmidt(), 1e-6).unwrap();
        assert_eq!(fd.max_abs(), 0.0);
    }

    #[test]
    fn finite_differences_are_exact_on_linear_response() {
        // One slice of a σ_z control: both hypotheses only precess, so with
        // |±⟩ projectors −P_e = −½ sin²(uT) − ½ cos²((1+u)T) in closed form.
        let p = DiscriminationProblem::new(
            HermitianOperator::zero(OperatorRole::Hypothesis),
            HermitianOperator::hypothesis(sigma_z()).unwrap(),
            0.0,
            vec![],
            vec![("z".to_string(), HermitianOperator::control(sigma_z()).unwrap())],
            DensityMatrix::plus(),
            TimeGrid::new(0.3, 1).unwrap(),
            Measurement::Helstrom,
        )
        .unwrap();
        let u = ControlField::constant(&["z"], 1, 0.4);
        let obj = Objective::fixed_local(Povm::plus_minus(), Priors::symmetric());
        let t = 0.3;
        let slope = |uu: f64| {
            -0.5 * t * (2.0 * uu * t).sin() + 0.5 * t * (2.0 * (1.0 + uu) * t).sin()
        };
        let fd = finite_difference_gradient(&p, &u, &obj, 1e-5).unwrap();
        assert!((fd.get(0, 0) - slope(0.4)).abs() < 1e-9, "{} vs {}", fd.get(0, 0), slope(0.4));
        let analytic = objective_gradient(&p, &u, &obj, GradientMode::Exact).unwrap();
        assert!((analytic.get(0, 0) - slope(0.4)).abs() < 1e-12);
    }

    #[test]
    fn truncated_gradient_error_is_second_order() {
        let err = |slices: usize| {
            let p = problem(0.1, sigma_x(), 2.0, slices);
            let mut u = p.zero_controls();
            let dt = p.grid().dt();
            for n in 0..slices {
                let t = (n as f64 + 0.5) * dt;
                u.set(0, n, 1.5 * t.sin());
                u.set(1, n, (2.0 * t).cos());
            }
            let exact = objective_gradient(&p, &u, &Objective::hilbert_schmidt(), GradientMode::Exact).unwrap();
            let trunc = objective_gradient(&p, &u, &Objective::hilbert_schmidt(), GradientMode::Truncated).unwrap();
            max_relative_error(&trunc, &exact)
        };
        let ratio = err(40) / err(80);
        assert!((ratio - 4.0).abs() < 0.6, "ratio {ratio}");
    }

    #[test]
    fn ensemble_constructors() {
        let e = DetuningEnsemble::uniform(-0.1, 0.1, 21).unwrap();
        assert_eq!(e.len(), 21);
        assert_eq!(e.samples()[0], -0.1);
        assert_eq!(e.samples()[20], 0.1);
        assert!(e.samples()[10].abs() < 1e-17);
        let t = DetuningEnsemble::trapezoid(-1.0, 1.0, 5).unwrap();
        assert_eq!(t.weights(), &[0.125, 0.25, 0.25, 0.25, 0.125]);
        assert!(DetuningEnsemble::uniform(0.1, -0.1, 3).is_err());
        assert!(DetuningEnsemble::new(vec![0.0, 1.0], vec![0.5]).is_err());
    }
}

//! The three noisy sensing settings, their uncontrolled baselines, and the
//! sweep and robustness experiments built on them.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::Mat2;
use crate::optimizer::{final_errors, optimize, DetuningEnsemble, Objective, OptimizationResult, OptimizeOptions};
use crate::problem::{ControlField, DiscriminationProblem, Measurement, TimeGrid};
use crate::quantum::{
    sigma_minus, sigma_plus, sigma_x, sigma_y, sigma_z, BlochVector, CollapseOperator, DensityMatrix,
    HermitianOperator, OperatorRole,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum NoiseKind {
    /// Dephasing along the signal axis, `n̂ = ẑ`.
    ParallelDephasing,
    /// Dephasing along `n̂ = x̂`.
    TransverseDephasing,
    SpontaneousEmission,
}

/// Noise channel and its rates. `gamma_plus` is used by emission only.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub gamma: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub gamma_plus: f64,
}

impl NoiseModel {
    pub fn new(kind: NoiseKind, gamma: f64) -> Self {
        Self { kind, gamma, gamma_plus: 0.0 }
    }

    pub fn parallel(gamma: f64) -> Self {
        Self::new(NoiseKind::ParallelDephasing, gamma)
    }

    pub fn transverse(gamma: f64) -> Self {
        Self::new(NoiseKind::TransverseDephasing, gamma)
    }

    /// Decay towards |0⟩ at rate `γ₋ = gamma`, with `γ₊ = 0`.
    pub fn emission(gamma: f64) -> Self {
        Self::new(NoiseKind::SpontaneousEmission, gamma)
    }

    pub fn with_gamma(self, gamma: f64) -> Self {
        Self { gamma, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        for rate in [self.gamma, self.gamma_plus] {
            if !(rate >= 0.0 && rate.is_finite()) {
                return Err(Error::NegativeRate { rate });
            }
        }
        Ok(())
    }

    /// Collapse operators as `(operator, rate)` pairs.
    pub fn collapses(&self) -> Result<Vec<CollapseOperator>> {
        self.validate()?;
        let ops = match self.kind {
            NoiseKind::ParallelDephasing => vec![CollapseOperator::new(sigma_z(), 0.5 * self.gamma)?],
            NoiseKind::TransverseDephasing => vec![CollapseOperator::new(sigma_x(), 0.5 * self.gamma)?],
            NoiseKind::SpontaneousEmission => vec![
                CollapseOperator::new(sigma_minus(), self.gamma)?,
                CollapseOperator::new(sigma_plus(), self.gamma_plus)?,
            ],
        };
        Ok(ops)
    }
}

/// Hypotheses `H₀ = 0` and `H₁ = (1+dω)σ_z`, controls `σ_x` and `σ_y`
/// labelled `x` and `y`, both starting in |+⟩.
pub fn make_problem(
    noise: NoiseModel,
    total_time: f64,
    slices: usize,
    detuning: f64,
    measurement: Measurement,
) -> Result<DiscriminationProblem> {
    make_problem_scaled(noise, total_time, slices, detuning, measurement, 1.0)
}

/// As [`make_problem`] with both control Hamiltonians multiplied by
/// `strength`; zero switches the controls off entirely.
pub fn make_problem_scaled(
    noise: NoiseModel,
    total_time: f64,
    slices: usize,
    detuning: f64,
    measurement: Measurement,
    strength: f64,
) -> Result<DiscriminationProblem> {
    let grid = TimeGrid::new(total_time, slices)?;
    let controls = vec![
        (String::from("x"), HermitianOperator::control(sigma_x().scale_real(strength))?),
        (String::from("y"), HermitianOperator::control(sigma_y().scale_real(strength))?),
    ];
    let problem = DiscriminationProblem::new(
        HermitianOperator::zero(OperatorRole::Hypothesis),
        HermitianOperator::hypothesis(sigma_z())?,
        detuning,
        noise.collapses()?,
        controls,
        DensityMatrix::plus(),
        grid,
        measurement,
    )?;
    Ok(problem.with_noise_tag(noise))
}

/// Step of the fixed-step Bloch-equation oracle.
pub const ORACLE_STEP: f64 = 1e-4;

fn bloch_rhs(noise: &NoiseModel, omega: f64, r: [f64; 3]) -> [f64; 3] {
    let [x, y, z] = r;
    // Precession dr/dt = 2ω ẑ × r.
    let (mut dx, mut dy, mut dz) = (-2.0 * omega * y, 2.0 * omega * x, 0.0);
    let g = noise.gamma;
    match noise.kind {
        NoiseKind::ParallelDephasing => {
            dx -= g * x;
            dy -= g * y;
        }
        NoiseKind::TransverseDephasing => {
            dy -= g * y;
            dz -= g * z;
        }
        NoiseKind::SpontaneousEmission => {
            let (gm, gp) = (g, noise.gamma_plus);
            dx -= 0.5 * (gm + gp) * x;
            dy -= 0.5 * (gm + gp) * y;
            dz += gm * (1.0 - z) - gp * (1.0 + z);
        }
    }
    [dx, dy, dz]
}

/// Free evolution of |+⟩ under `H = ω σ_z` by classical RK4.
pub fn uncontrolled_bloch(noise: &NoiseModel, omega: f64, total_time: f64) -> BlochVector {
    let steps = (total_time / ORACLE_STEP).ceil().max(1.0) as usize;
    let h = total_time / steps as f64;
    let mut r = [1.0, 0.0, 0.0];
    let axpy = |r: [f64; 3], k: [f64; 3], s: f64| [r[0] + s * k[0], r[1] + s * k[1], r[2] + s * k[2]];
    for _ in 0..steps {
        let k1 = bloch_rhs(noise, omega, r);
        let k2 = bloch_rhs(noise, omega, axpy(r, k1, 0.5 * h));
        let k3 = bloch_rhs(noise, omega, axpy(r, k2, 0.5 * h));
        let k4 = bloch_rhs(noise, omega, axpy(r, k3, h));
        for i in 0..3 {
            r[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    BlochVector { x: r[0], y: r[1], z: r[2] }
}

/// Helstrom error with all controls off. Closed form for parallel
/// dephasing, Bloch-equation integration otherwise.
pub fn uncontrolled_error(noise: &NoiseModel, total_time: f64, detuning: f64) -> f64 {
    if noise.kind == NoiseKind::ParallelDephasing {
        return 0.5 * (1.0 - (-noise.gamma * total_time).exp() * ((1.0 + detuning) * total_time).sin().abs());
    }
    let r0 = uncontrolled_bloch(noise, 0.0, total_time);
    let r1 = uncontrolled_bloch(noise, 1.0 + detuning, total_time);
    0.5 * (1.0 - 0.5 * r0.distance(&r1))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlochSample {
    pub time: f64,
    pub bloch: BlochVector,
}

/// Bloch vectors of both hypotheses at every slice boundary.
pub fn bloch_trajectories(problem: &DiscriminationProblem, controls: &ControlField) -> Result<[Vec<BlochSample>; 2]> {
    let one = |j| -> Result<Vec<BlochSample>> {
        let (_, traj) = crate::propagation::evolve(problem, j, controls, true)?;
        Ok(traj
            .expect("recorded")
            .points
            .iter()
            .map(|p| BlochSample { time: p.time, bloch: p.state.to_bloch() })
            .collect())
    };
    Ok([one(0)?, one(1)?])
}

/// Parameter varied by a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SweepParameter {
    TotalTime,
    Gamma,
    Detuning,
}

/// One setting of the problem parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Setting {
    pub noise: NoiseModel,
    pub total_time: f64,
    /// Slice width; the slice count is `round(T/dt)`.
    pub dt: f64,
    pub detuning: f64,
}

impl Setting {
    pub fn slices(&self) -> usize {
        (self.total_time / self.dt).round().max(1.0) as usize
    }

    pub fn with(self, parameter: SweepParameter, value: f64) -> Self {
        match parameter {
            SweepParameter::TotalTime => Self { total_time: value, ..self },
            SweepParameter::Gamma => Self { noise: self.noise.with_gamma(value), ..self },
            SweepParameter::Detuning => Self { detuning: value, ..self },
        }
    }

    pub fn problem(&self, measurement: Measurement, strength: f64) -> Result<DiscriminationProblem> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidGrid { reason: "time step must be positive and finite" });
        }
        make_problem_scaled(self.noise, self.total_time, self.slices(), self.detuning, measurement, strength)
    }
}

/// A parameter sweep. With `optimizer = None` every point uses zero control.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    pub base: Setting,
    pub measurement: Measurement,
    pub optimizer: Option<OptimizeOptions>,
    /// Train against this detuning ensemble instead of the point's own detuning.
    pub ensemble: Option<DetuningEnsemble>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub pe_helstrom: f64,
    pub pe_fixed: f64,
    pub result: Option<OptimizationResult>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::InvalidOption { option: "values", reason: String::from("sweep list is empty") });
        }
        for &v in &self.values {
            let ok = v.is_finite()
                && match self.parameter {
                    SweepParameter::TotalTime => v > 0.0,
                    SweepParameter::Gamma => v >= 0.0,
                    SweepParameter::Detuning => true,
                };
            if !ok {
                return Err(Error::InvalidOption {
                    option: "values",
                    reason: alloc::format!("{v} is outside the physical range"),
                });
            }
        }
        if let Some(o) = &self.optimizer {
            o.validate()?;
        }
        self.base.noise.validate()
    }

    pub fn problem_at(&self, value: f64) -> Result<DiscriminationProblem> {
        self.base.with(self.parameter, value).problem(self.measurement, 1.0)
    }

    pub fn objective(&self) -> Objective {
        let o = Objective::for_measurement(&self.measurement);
        match &self.ensemble {
            Some(e) => o.robust(e.clone()),
            None => o,
        }
    }

    /// Assembles a row from an already optimized point.
    pub fn row(&self, value: f64, result: Option<OptimizationResult>) -> Result<SweepRow> {
        let (pe_helstrom, pe_fixed) = match &result {
            Some(r) => (r.helstrom_error, r.fixed_local_error),
            None => {
                let p = self.problem_at(value)?;
                final_errors(&p, &p.zero_controls())?
            }
        };
        Ok(SweepRow { value, pe_helstrom, pe_fixed, result })
    }

    pub fn run_point(&self, value: f64) -> Result<SweepRow> {
        let result = match &self.optimizer {
            Some(o) => Some(optimize(&self.problem_at(value)?, &self.objective(), o)?),
            None => None,
        };
        self.row(value, result)
    }
}

/// Runs every sweep point in order.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    spec.values.iter().map(|&v| spec.run_point(v)).collect()
}

/// Helstrom errors of the three schemes at one detuning.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RobustnessRow {
    pub detuning: f64,
    pub uncontrolled: f64,
    pub optimal: f64,
    pub robust: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RobustnessReport {
    pub window: (f64, f64),
    /// Sorted by detuning.
    pub rows: Vec<RobustnessRow>,
    /// Weighted averages ⟨P_e^H⟩ over the window, same column order as rows.
    pub average: RobustnessRow,
}

impl RobustnessReport {
    /// Fractional cut in ⟨P_e^H⟩ of the robust pulse against the optimal one.
    pub fn robust_reduction(&self) -> f64 {
        1.0 - self.average.robust / self.average.optimal
    }
}

/// Evaluates zero control, the `dω = 0`-optimal pulse and the robust pulse
/// at every detuning of `evaluation`.
pub fn robustness_report(
    problem: &DiscriminationProblem,
    optimal: &ControlField,
    robust: &ControlField,
    evaluation: &DetuningEnsemble,
) -> Result<RobustnessReport> {
    let zero = problem.zero_controls();
    let mut rows = Vec::with_capacity(evaluation.len());
    for &d in evaluation.samples() {
        let p = problem.with_detuning(d);
        rows.push(RobustnessRow {
            detuning: d,
            uncontrolled: final_errors(&p, &zero)?.0,
            optimal: final_errors(&p, optimal)?.0,
            robust: final_errors(&p, robust)?.0,
        });
    }
    let mut average = RobustnessRow { detuning: 0.0, uncontrolled: 0.0, optimal: 0.0, robust: 0.0 };
    for (row, w) in rows.iter().zip(evaluation.weights()) {
        average.detuning += w * row.detuning;
        average.uncontrolled += w * row.uncontrolled;
        average.optimal += w * row.optimal;
        average.robust += w * row.robust;
    }
    // Sample order may be arbitrary for hand-built ensembles.
    rows.sort_by(|a, b| a.detuning.total_cmp(&b.detuning));
    let window = (rows[0].detuning, rows[rows.len() - 1].detuning);
    Ok(RobustnessReport { window, rows, average })
}

/// `[−π/(2T), π/(2T)]`
pub fn natural_window(total_time: f64) -> (f64, f64) {
    let half = core::f64::consts::FRAC_PI_2 / total_time;
    (-half, half)
}

/// Trains the `dω = 0`-optimal pulse and the pulse robust over `training`.
pub fn train_pulses(
    problem: &DiscriminationProblem,
    training: &DetuningEnsemble,
    options: &OptimizeOptions,
) -> Result<(OptimizationResult, OptimizationResult)> {
    let nominal = problem.with_detuning(0.0);
    let objective = Objective::for_measurement(problem.measurement());
    let optimal = optimize(&nominal, &objective, options)?;
    let robust = optimize(&nominal, &objective.robust(training.clone()), options)?;
    Ok((optimal, robust))
}

/// Matrix of a dephasing axis `n̂·σ`.
pub fn dephasing_axis(theta: f64, phi: f64) -> Mat2 {
    sigma_x().scale_real(theta.sin() * phi.cos())
        + sigma_y().scale_real(theta.sin() * phi.sin())
        + sigma_z().scale_real(theta.cos())
}

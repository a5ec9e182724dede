//! Time grids, control fields and the discrimination problem they act on.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::discrimination::{Povm, Priors};
use crate::error::{Error, Result};
use crate::quantum::{
    control_generator_term, lindblad_generator, CollapseOperator, DensityMatrix, HermitianOperator, OperatorRole,
    Superoperator,
};
use crate::scenarios::NoiseModel;

/// Uniform partition of `[0, T]` into `N` slices of width `Δt = T/N`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TimeGrid {
    total_time: f64,
    slices: usize,
}

impl TimeGrid {
    pub fn new(total_time: f64, slices: usize) -> Result<Self> {
        if slices == 0 {
            return Err(Error::InvalidGrid { reason: "at least one slice is required" });
        }
        if !(total_time > 0.0 && total_time.is_finite()) {
            return Err(Error::InvalidGrid { reason: "total time must be positive and finite" });
        }
        Ok(Self { total_time, slices })
    }

    /// Grid whose step is as close to `step` as an integer slice count allows.
    pub fn with_step(total_time: f64, step: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidGrid { reason: "step must be positive and finite" });
        }
        let slices = (total_time / step).round().max(1.0) as usize;
        Self::new(total_time, slices)
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    pub fn slices(&self) -> usize {
        self.slices
    }

    pub fn dt(&self) -> f64 {
        self.total_time / self.slices as f64
    }

    /// Start time of slice `n`.
    pub fn slice_start(&self, n: usize) -> f64 {
        n as f64 * self.dt()
    }
}

/// Piecewise-constant amplitudes `u[k][n]` for `K` channels over `N` slices.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ControlField {
    labels: Vec<String>,
    slices: usize,
    values: Vec<f64>,
}

impl ControlField {
    pub fn new(labels: Vec<String>, slices: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != labels.len() * slices {
            return Err(Error::DimensionMismatch {
                what: "control values",
                expected: labels.len() * slices,
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "control field" });
        }
        Ok(Self { labels, slices, values })
    }

    pub fn constant(labels: &[&str], slices: usize, value: f64) -> Self {
        Self {
            labels: labels.iter().map(|s| s.to_string()).collect(),
            slices,
            values: vec![value; labels.len() * slices],
        }
    }

    pub fn zeros(labels: &[&str], slices: usize) -> Self {
        Self::constant(labels, slices, 0.0)
    }

    /// A field of the same shape holding `values`.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.labels.clone(), self.slices, values)
    }

    pub fn channels(&self) -> usize {
        self.labels.len()
    }

    pub fn slices(&self) -> usize {
        self.slices
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn get(&self, channel: usize, slice: usize) -> f64 {
        self.values[channel * self.slices + slice]
    }

    pub fn set(&mut self, channel: usize, slice: usize, value: f64) {
        self.values[channel * self.slices + slice] = value;
    }

    pub fn channel(&self, channel: usize) -> &[f64] {
        &self.values[channel * self.slices..(channel + 1) * self.slices]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Which decision rule turns the final states into an error probability.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Measurement {
    Helstrom,
    FixedLocal { povm: Povm, priors: Priors },
}

impl Measurement {
    /// Projectors onto |±⟩ with equal priors.
    pub fn fixed_local_default() -> Self {
        Measurement::FixedLocal { povm: Povm::plus_minus(), priors: Priors::symmetric() }
    }
}

/// A controlled binary hypothesis test on one qubit.
///
/// Hypothesis 0 evolves under `H_0`; hypothesis 1 under `(1 + dω)·S` with
/// `S` the signal operator and `dω` the detuning. Both share the dissipator,
/// the control Hamiltonians and the initial state.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscriminationProblem {
    null_hamiltonian: HermitianOperator,
    signal: HermitianOperator,
    detuning: f64,
    collapses: Vec<CollapseOperator>,
    controls: Vec<HermitianOperator>,
    labels: Vec<String>,
    initial: DensityMatrix,
    grid: TimeGrid,
    measurement: Measurement,
    noise: Option<NoiseModel>,
}

impl DiscriminationProblem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        null_hamiltonian: HermitianOperator,
        signal: HermitianOperator,
        detuning: f64,
        collapses: Vec<CollapseOperator>,
        controls: Vec<(String, HermitianOperator)>,
        initial: DensityMatrix,
        grid: TimeGrid,
        measurement: Measurement,
    ) -> Result<Self> {
        if !detuning.is_finite() {
            return Err(Error::NonFinite { what: "detuning" });
        }
        for h in [&null_hamiltonian, &signal] {
            if h.role() == OperatorRole::CollapsePrefactor {
                return Err(Error::NotHermitian { defect: h.matrix().hermiticity_defect() });
            }
        }
        initial.validate(1e-10, 1e-10, 1e-10)?;
        let (labels, controls) = controls.into_iter().unzip();
        Ok(Self {
            null_hamiltonian,
            signal,
            detuning,
            collapses,
            controls,
            labels,
            initial,
            grid,
            measurement,
            noise: None,
        })
    }

    pub(crate) fn with_noise_tag(mut self, noise: NoiseModel) -> Self {
        self.noise = Some(noise);
        self
    }

    pub fn with_detuning(&self, detuning: f64) -> Self {
        Self { detuning, ..self.clone() }
    }

    pub fn with_measurement(&self, measurement: Measurement) -> Self {
        Self { measurement, ..self.clone() }
    }

    pub fn with_grid(&self, grid: TimeGrid) -> Self {
        Self { grid, ..self.clone() }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn detuning(&self) -> f64 {
        self.detuning
    }

    pub fn measurement(&self) -> &Measurement {
        &self.measurement
    }

    pub fn noise(&self) -> Option<&NoiseModel> {
        self.noise.as_ref()
    }

    pub fn initial(&self) -> &DensityMatrix {
        &self.initial
    }

    pub fn collapses(&self) -> &[CollapseOperator] {
        &self.collapses
    }

    pub fn control_operators(&self) -> &[HermitianOperator] {
        &self.controls
    }

    pub fn channel_labels(&self) -> &[String] {
        &self.labels
    }

    pub fn channels(&self) -> usize {
        self.controls.len()
    }

    /// `H_0`, or `(1 + detuning)·S` for hypothesis 1.
    pub fn hamiltonian(&self, hypothesis: usize, detuning: f64) -> HermitianOperator {
        match hypothesis {
            0 => self.null_hamiltonian,
            _ => self.signal.scaled(1.0 + detuning),
        }
    }

    /// Generator with all controls off.
    pub fn drift_generator(&self, hypothesis: usize, detuning: f64) -> Result<Superoperator> {
        lindblad_generator(&self.hamiltonian(hypothesis, detuning), &self.collapses)
    }

    pub fn control_generators(&self) -> Vec<Superoperator> {
        self.controls.iter().map(control_generator_term).collect()
    }

    /// Zero field on this problem's grid and channels.
    pub fn zero_controls(&self) -> ControlField {
        self.constant_controls(0.0)
    }

    pub fn constant_controls(&self, value: f64) -> ControlField {
        ControlField {
            labels: self.labels.clone(),
            slices: self.grid.slices(),
            values: vec![value; self.labels.len() * self.grid.slices()],
        }
    }

    pub fn check_controls(&self, controls: &ControlField) -> Result<()> {
        if controls.channels() != self.channels() {
            return Err(Error::DimensionMismatch {
                what: "control channels",
                expected: self.channels(),
                found: controls.channels(),
            });
        }
        if controls.slices() != self.grid.slices() {
            return Err(Error::DimensionMismatch {
                what: "control slices",
                expected: self.grid.slices(),
                found: controls.slices(),
            });
        }
        Ok(())
    }
}

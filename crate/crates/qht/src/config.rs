//! Run configuration: a versioned JSON document.

use serde::{Deserialize, Serialize};

use qht_core::optimizer::{AnnealOptions, GrapeOptions, LineSearchOptions, RestartOptions};
use qht_core::scenarios::{natural_window, Setting, SweepParameter};
use qht_core::{
    DetuningEnsemble, GradientMode, Measurement, Method, NoiseKind, NoiseModel, Objective, OptimizeOptions, Povm,
    Priors,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("{key}: {message}")]
    Parse { key: String, message: String },
    #[error("{key}: {reason}")]
    Invalid { key: &'static str, reason: String },
}

fn invalid(key: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key, reason: reason.into() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MeasurementKind {
    #[default]
    Helstrom,
    FixedLocal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PovmKind {
    #[default]
    PlusMinus,
    Computational,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Quadrature {
    #[default]
    Uniform,
    Trapezoid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMethod {
    Grape,
    Sagrape,
    /// Zero control: the uncontrolled baseline.
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
    #[serde(default = "default_window_samples")]
    pub samples: usize,
    #[serde(default)]
    pub quadrature: Quadrature,
}

fn default_window_samples() -> usize {
    21
}

impl Window {
    pub fn ensemble(&self) -> qht_core::Result<DetuningEnsemble> {
        match self.quadrature {
            Quadrature::Uniform => DetuningEnsemble::uniform(self.lo, self.hi, self.samples),
            Quadrature::Trapezoid => DetuningEnsemble::trapezoid(self.lo, self.hi, self.samples),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnnealConfig {
    pub initial_temperature: f64,
    pub cooling: f64,
    pub steps: usize,
    pub sigma: f64,
    pub grape_iterations: usize,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        let d = AnnealOptions::default();
        Self {
            initial_temperature: d.initial_temperature,
            cooling: d.cooling,
            steps: d.steps,
            sigma: d.sigma,
            grape_iterations: d.grape_iterations,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub method: Method,
    pub gradient: GradientMode,
    pub threshold: f64,
    pub max_iterations: usize,
    pub amplitude_bound: Option<f64>,
    pub line_search: LineSearchOptions,
    pub anneal: AnnealConfig,
    pub restarts: usize,
    pub initial_amplitude: f64,
    pub random_amplitude: f64,
    pub include_zero: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let g = GrapeOptions::default();
        let r = RestartOptions::default();
        Self {
            method: Method::Grape,
            gradient: g.gradient,
            threshold: g.threshold,
            max_iterations: g.max_iterations,
            amplitude_bound: None,
            line_search: g.line_search,
            anneal: AnnealConfig::default(),
            restarts: r.restarts,
            initial_amplitude: r.initial_amplitude,
            random_amplitude: r.random_amplitude,
            include_zero: r.include_zero,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    /// Overrides `optimizer.method`; `none` sweeps the zero pulse.
    #[serde(default)]
    pub method: Option<SweepMethod>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradcheckConfig {
    /// Random controls are drawn from `[-amplitude, amplitude]`.
    pub amplitude: f64,
    pub step: f64,
    pub tolerance: f64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self { amplitude: 0.5, step: 1e-6, tolerance: 1e-3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub scenario: NoiseKind,
    pub gamma: f64,
    #[serde(default)]
    pub gamma_plus: f64,
    pub total_time: f64,
    /// Slice count; when absent it follows from `dt`.
    #[serde(default)]
    pub slices: Option<usize>,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub detuning: f64,
    #[serde(default = "default_strength")]
    pub control_strength: f64,
    #[serde(default)]
    pub measurement: MeasurementKind,
    #[serde(default)]
    pub povm: PovmKind,
    #[serde(default = "default_priors")]
    pub priors: [f64; 2],
    /// Training window for a robust objective.
    #[serde(default)]
    pub robust: Option<Window>,
    /// Window the robustness report is evaluated on; defaults to
    /// `[−π/(2T), π/(2T)]` with 41 points.
    #[serde(default)]
    pub evaluation: Option<Window>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub gradcheck: GradcheckConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<String>,
}

fn default_dt() -> f64 {
    0.05
}

fn default_strength() -> f64 {
    1.0
}

fn default_priors() -> [f64; 2] {
    [0.5, 0.5]
}

/// A parsed configuration together with its exact source text.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub text: String,
    pub config: RunConfig,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            ConfigError::Parse { key, message: e.into_inner().to_string() }
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &std::path::Path) -> Result<LoadedConfig, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
        let config = Self::parse(&text)?;
        Ok(LoadedConfig { text, config })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid("schema_version", format!("expected {SCHEMA_VERSION}, found {}", self.schema_version)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(invalid("gamma", format!("rate must be non-negative, got {}", self.gamma)));
        }
        if !(self.gamma_plus >= 0.0 && self.gamma_plus.is_finite()) {
            return Err(invalid("gamma_plus", format!("rate must be non-negative, got {}", self.gamma_plus)));
        }
        if !(self.total_time > 0.0 && self.total_time.is_finite()) {
            return Err(invalid("total_time", "must be positive"));
        }
        if self.slices == Some(0) {
            return Err(invalid("slices", "must be at least 1"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("dt", "must be positive"));
        }
        if !self.detuning.is_finite() {
            return Err(invalid("detuning", "must be finite"));
        }
        if !self.control_strength.is_finite() {
            return Err(invalid("control_strength", "must be finite"));
        }
        Priors::new(self.priors[0], self.priors[1]).map_err(|e| invalid("priors", e.to_string()))?;
        if let Some(w) = &self.robust {
            w.ensemble().map_err(|e| invalid("robust", e.to_string()))?;
        }
        if let Some(w) = &self.evaluation {
            w.ensemble().map_err(|e| invalid("evaluation", e.to_string()))?;
        }
        self.optimize_options().validate().map_err(|e| invalid("optimizer", e.to_string()))?;
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(invalid("sweep.values", "sweep list is empty"));
            }
            for &v in &s.values {
                let ok = v.is_finite()
                    && match s.parameter {
                        SweepParameter::TotalTime => v > 0.0,
                        SweepParameter::Gamma => v >= 0.0,
                        SweepParameter::Detuning => true,
                    };
                if !ok {
                    return Err(invalid("sweep.values", format!("{v} is outside the physical range")));
                }
            }
        }
        let g = &self.gradcheck;
        if !(g.step > 0.0 && g.tolerance > 0.0 && g.amplitude >= 0.0) {
            return Err(invalid("gradcheck", "step and tolerance must be positive, amplitude non-negative"));
        }
        Ok(())
    }

    pub fn noise(&self) -> NoiseModel {
        NoiseModel { kind: self.scenario, gamma: self.gamma, gamma_plus: self.gamma_plus }
    }

    pub fn setting(&self) -> Setting {
        let dt = match self.slices {
            Some(n) => self.total_time / n as f64,
            None => self.dt,
        };
        Setting { noise: self.noise(), total_time: self.total_time, dt, detuning: self.detuning }
    }

    pub fn measurement(&self) -> Measurement {
        match self.measurement {
            MeasurementKind::Helstrom => Measurement::Helstrom,
            MeasurementKind::FixedLocal => Measurement::FixedLocal {
                povm: match self.povm {
                    PovmKind::PlusMinus => Povm::plus_minus(),
                    PovmKind::Computational => Povm::computational(),
                },
                priors: Priors::new(self.priors[0], self.priors[1]).expect("validated"),
            },
        }
    }

    pub fn objective(&self) -> Objective {
        let base = Objective::for_measurement(&self.measurement());
        match &self.robust {
            Some(w) => base.robust(w.ensemble().expect("validated")),
            None => base,
        }
    }

    pub fn evaluation_window(&self) -> Window {
        self.evaluation.clone().unwrap_or_else(|| {
            let (lo, hi) = natural_window(self.total_time);
            Window { lo, hi, samples: 41, quadrature: Quadrature::Uniform }
        })
    }

    pub fn optimize_options(&self) -> OptimizeOptions {
        let o = &self.optimizer;
        let a = &o.anneal;
        OptimizeOptions {
            method: o.method,
            grape: GrapeOptions {
                threshold: o.threshold,
                max_iterations: o.max_iterations,
                gradient: o.gradient,
                line_search: o.line_search,
                amplitude_bound: o.amplitude_bound,
                seed: self.seed,
            },
            anneal: AnnealOptions {
                initial_temperature: a.initial_temperature,
                cooling: a.cooling,
                steps: a.steps,
                sigma: a.sigma,
                grape_iterations: a.grape_iterations,
                seed: self.seed,
            },
            restarts: RestartOptions {
                restarts: o.restarts,
                initial_amplitude: o.initial_amplitude,
                random_amplitude: o.random_amplitude,
                include_zero: o.include_zero,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"schema_version": 1, "scenario": "parallel-dephasing", "gamma": 0.1, "total_time": 10}"#;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.setting().slices(), 200);
        assert_eq!(c.optimizer.max_iterations, 2000);
        assert_eq!(c.optimize_options().restarts.initial_amplitude, 0.01);
        assert_eq!(c.measurement(), Measurement::Helstrom);
    }

    #[test]
    fn negative_gamma_names_the_key() {
        let text = MINIMAL.replace("0.1", "-1");
        let err = RunConfig::parse(&text).unwrap_err();
        assert!(err.to_string().starts_with("gamma:"), "{err}");
    }

    #[test]
    fn parse_errors_carry_the_path() {
        let text = r#"{"schema_version": 1, "scenario": "parallel-dephasing", "gamma": 0.1, "total_time": 10,
            "optimizer": {"threshold": "tiny"}}"#;
        let err = RunConfig::parse(text).unwrap_err();
        assert!(err.to_string().starts_with("optimizer.threshold"), "{err}");
        let err = RunConfig::parse(&MINIMAL.replace("parallel-dephasing", "magnetic")).unwrap_err();
        assert!(err.to_string().starts_with("scenario"), "{err}");
        let err = RunConfig::parse(&MINIMAL.replace("\"gamma\"", "\"gama\"")).unwrap_err();
        assert!(err.to_string().contains("gama"), "{err}");
    }

    #[test]
    fn wrong_schema_version_rejected() {
        let err = RunConfig::parse(&MINIMAL.replace("\"schema_version\": 1", "\"schema_version\": 2")).unwrap_err();
        assert!(err.to_string().starts_with("schema_version"));
    }

    #[test]
    fn empty_sweep_rejected() {
        let text = MINIMAL.replace('}', r#", "sweep": {"parameter": "gamma", "values": []}}"#);
        let err = RunConfig::parse(&text).unwrap_err();
        assert!(err.to_string().starts_with("sweep.values"), "{err}");
    }
}

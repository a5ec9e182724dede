//! The five commands: each loads a config, runs, and persists its outputs.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use qht_core::optimizer::{
    final_errors, finite_difference_gradient, max_relative_error, objective_gradient, run_restart, select_best, zero_candidate,
};
use qht_core::scenarios::{bloch_trajectories, robustness_report, RobustnessReport, SweepRow, SweepSpec};
use qht_core::{
    uncontrolled_error, BlochVector, ControlField, DiscriminationProblem, GradientMode, Method, Objective,
    OptimizationResult, OptimizeOptions,
};

use crate::config::{ConfigError, LoadedConfig, Quadrature, RunConfig, SweepMethod, Window};
use crate::io::{self, IoError};

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("numerical failure: {0}")]
    Numerical(#[from] qht_core::Error),
    #[error("{0}")]
    Pool(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Io(_) | HarnessError::Pool(_) => 2,
            HarnessError::Numerical(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

/// How a command that ran to completion ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Converged,
    NotConverged,
    /// Gradient check outside tolerance.
    CheckFailed,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Converged => 0,
            Status::NotConverged => 1,
            Status::CheckFailed => 3,
        }
    }

    fn from_converged(all: bool) -> Self {
        if all {
            Status::Converged
        } else {
            Status::NotConverged
        }
    }
}

/// Command-line values that take precedence over the config.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub restarts: Option<usize>,
    pub jobs: Option<usize>,
}

/// Everything a command needs, resolved from config and flags.
pub struct Run {
    pub loaded: LoadedConfig,
    pub out: PathBuf,
    pool: rayon::ThreadPool,
}

impl Run {
    pub fn prepare(config_path: &Path, overrides: &Overrides) -> Result<Self> {
        let mut loaded = RunConfig::load(config_path)?;
        if let Some(seed) = overrides.seed {
            loaded.config.seed = seed;
        }
        if let Some(r) = overrides.restarts {
            loaded.config.optimizer.restarts = r;
        }
        loaded.config.validate()?;
        let out = overrides
            .out
            .clone()
            .or_else(|| loaded.config.output_dir.as_ref().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"));
        io::create_dir(&out)?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(overrides.jobs.unwrap_or(0))
            .build()
            .map_err(|e| HarnessError::Pool(e.to_string()))?;
        Ok(Self { loaded, out, pool })
    }

    pub fn config(&self) -> &RunConfig {
        &self.loaded.config
    }

    fn problem(&self) -> Result<DiscriminationProblem> {
        let c = self.config();
        Ok(c.setting().problem(c.measurement(), c.control_strength)?)
    }

    fn write_config_copy(&self) -> Result<()> {
        Ok(io::write_bytes(&self.out.join("config.json"), self.loaded.text.as_bytes())?)
    }

    fn write_meta(&self, started: Instant) -> Result<()> {
        let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let meta = Meta {
            tool_version: TOOL_VERSION.to_string(),
            timestamp_unix: timestamp,
            wall_clock_seconds: started.elapsed().as_secs_f64(),
        };
        Ok(io::write_json(&self.out.join("meta.json"), &meta)?)
    }

    /// Best of all restarts, spread over the worker pool.
    fn optimize(
        &self,
        problem: &DiscriminationProblem,
        objective: &Objective,
        options: &OptimizeOptions,
    ) -> Result<OptimizationResult> {
        optimize_parallel(&self.pool, problem, objective, options)
    }
}

fn optimize_parallel(
    pool: &rayon::ThreadPool,
    problem: &DiscriminationProblem,
    objective: &Objective,
    options: &OptimizeOptions,
) -> Result<OptimizationResult> {
    options.validate()?;
    let mut results: Vec<OptimizationResult> = pool.install(|| {
        (0..options.restarts.restarts)
            .into_par_iter()
            .map(|r| run_restart(problem, objective, options, r))
            .collect::<qht_core::Result<_>>()
    })?;
    if options.restarts.include_zero {
        results.push(zero_candidate(problem, objective, options)?);
    }
    Ok(select_best(results).expect("at least one restart"))
}

/// Wall-clock and date information, kept apart from the reproducible outputs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Meta {
    pub tool_version: String,
    pub timestamp_unix: u64,
    pub wall_clock_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOutputs {
    pub pe_helstrom: f64,
    pub pe_fixed: f64,
    pub pe_uncontrolled: f64,
    /// Final Bloch vectors of hypotheses 0 and 1.
    pub final_bloch: [BlochVector; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub tool_version: String,
    /// The configuration file exactly as read.
    pub config: String,
    pub result: OptimizationResult,
    pub outputs: RunOutputs,
}

pub fn cmd_optimize(config_path: &Path, overrides: &Overrides) -> Result<(Status, RunRecord)> {
    let started = Instant::now();
    let run = Run::prepare(config_path, overrides)?;
    let c = run.config();
    let problem = run.problem()?;
    let result = run.optimize(&problem, &c.objective(), &c.optimize_options())?;
    let [t0, t1] = bloch_trajectories(&problem, &result.controls)?;
    let outputs = RunOutputs {
        pe_helstrom: result.helstrom_error,
        pe_fixed: result.fixed_local_error,
        pe_uncontrolled: uncontrolled_error(&c.noise(), c.total_time, c.detuning),
        final_bloch: [t0.last().expect("nonempty").bloch, t1.last().expect("nonempty").bloch],
    };
    let record = RunRecord {
        tool_version: TOOL_VERSION.to_string(),
        config: run.loaded.text.clone(),
        result,
        outputs,
    };
    io::write_json(&run.out.join("record.json"), &record)?;
    io::write_pulse(&run.out.join("pulse.csv"), problem.grid(), &record.result.controls)?;
    io::write_trace(&run.out.join("trace.csv"), &record.result.trace)?;
    run.write_config_copy()?;
    run.write_meta(started)?;
    Ok((Status::from_converged(record.result.converged), record))
}

pub fn load_record(path: &Path) -> Result<RunRecord> {
    Ok(io::read_json(path)?)
}

pub fn cmd_sweep(config_path: &Path, overrides: &Overrides) -> Result<Status> {
    let started = Instant::now();
    let run = Run::prepare(config_path, overrides)?;
    let c = run.config();
    let sweep = c
        .sweep
        .as_ref()
        .ok_or(ConfigError::Invalid { key: "sweep", reason: "required by the sweep command".into() })?;
    let mut options = c.optimize_options();
    let optimizer = match sweep.method {
        Some(SweepMethod::None) => None,
        Some(SweepMethod::Grape) => Some(Method::Grape),
        Some(SweepMethod::Sagrape) => Some(Method::Sagrape),
        None => Some(options.method),
    };
    if let Some(m) = optimizer {
        options.method = m;
    }
    let spec = SweepSpec {
        parameter: sweep.parameter,
        values: sweep.values.clone(),
        base: c.setting(),
        measurement: c.measurement(),
        optimizer: optimizer.map(|_| options),
        ensemble: c.robust.as_ref().map(|w| w.ensemble().expect("validated")),
    };
    spec.validate()?;
    let strength = c.control_strength;
    let pulses = run.out.join("pulses");
    if spec.optimizer.is_some() {
        io::create_dir(&pulses)?;
    }
    let rows: Vec<_> = run.pool.install(|| {
        spec.values
            .par_iter()
            .enumerate()
            .map(|(i, &v)| -> Result<_> {
                let problem = spec.base.with(spec.parameter, v).problem(spec.measurement, strength)?;
                let result = match &spec.optimizer {
                    Some(o) => Some(optimize_parallel(&run.pool, &problem, &spec.objective(), o)?),
                    None => None,
                };
                let file = match &result {
                    Some(r) => {
                        let name = format!("pulses/point_{i:03}.csv");
                        io::write_pulse(&run.out.join(&name), problem.grid(), &r.controls)?;
                        name
                    }
                    None => String::new(),
                };
                let (pe_helstrom, pe_fixed) = match &result {
                    Some(r) => (r.helstrom_error, r.fixed_local_error),
                    None => final_errors(&problem, &problem.zero_controls())?,
                };
                let row = SweepRow { value: v, pe_helstrom, pe_fixed, result };
                Ok((row, file))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    io::write_sweep(&run.out.join("sweep.csv"), &rows)?;
    run.write_config_copy()?;
    run.write_meta(started)?;
    let all = rows.iter().all(|(r, _)| r.result.as_ref().map_or(true, |x| x.converged));
    Ok(Status::from_converged(all))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustSummary {
    pub training: Window,
    pub evaluation: Window,
    pub report: RobustnessReport,
    /// Fractional cut in ⟨P_e^H⟩ of the robust pulse against the optimal one.
    pub robust_reduction: f64,
    pub optimal_converged: bool,
    pub robust_converged: bool,
}

pub fn cmd_robust(config_path: &Path, overrides: &Overrides) -> Result<(Status, RobustSummary)> {
    let started = Instant::now();
    let run = Run::prepare(config_path, overrides)?;
    let c = run.config();
    let training = c
        .robust
        .clone()
        .unwrap_or(Window { lo: -0.1, hi: 0.1, samples: 21, quadrature: Quadrature::Uniform });
    let evaluation = c.evaluation_window();
    let problem = run.problem()?.with_detuning(0.0);
    let base = Objective::for_measurement(problem.measurement());
    let options = c.optimize_options();
    let optimal = run.optimize(&problem, &base, &options)?;
    let robust = run.optimize(&problem, &base.robust(training.ensemble()?), &options)?;
    let report = robustness_report(&problem, &optimal.controls, &robust.controls, &evaluation.ensemble()?)?;
    io::write_robustness(&run.out.join("robust.csv"), &report)?;
    io::write_pulse(&run.out.join("optimal_pulse.csv"), problem.grid(), &optimal.controls)?;
    io::write_pulse(&run.out.join("robust_pulse.csv"), problem.grid(), &robust.controls)?;
    let summary = RobustSummary {
        training,
        evaluation,
        robust_reduction: report.robust_reduction(),
        report,
        optimal_converged: optimal.converged,
        robust_converged: robust.converged,
    };
    io::write_json(&run.out.join("robust_summary.json"), &summary)?;
    run.write_config_copy()?;
    run.write_meta(started)?;
    Ok((Status::from_converged(optimal.converged && robust.converged), summary))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub exact: f64,
    pub truncated: f64,
    /// Truncated-mode error with every slice split in two.
    pub truncated_half_step: f64,
    pub truncated_ratio: f64,
    pub max_abs_gradient: f64,
    pub tolerance: f64,
}

/// Each slice repeated twice: the same pulse on a grid of half the step.
fn refine(problem: &DiscriminationProblem, u: &ControlField) -> Result<(DiscriminationProblem, ControlField)> {
    let grid = qht_core::TimeGrid::new(problem.grid().total_time(), 2 * u.slices())?;
    let fine = problem.with_grid(grid);
    let mut v = fine.zero_controls();
    for k in 0..u.channels() {
        for n in 0..u.slices() {
            v.set(k, 2 * n, u.get(k, n));
            v.set(k, 2 * n + 1, u.get(k, n));
        }
    }
    Ok((fine, v))
}

pub fn cmd_gradcheck(config_path: &Path, overrides: &Overrides) -> Result<(Status, GradcheckReport)> {
    let started = Instant::now();
    let run = Run::prepare(config_path, overrides)?;
    let c = run.config();
    let problem = run.problem()?;
    let objective = c.objective();
    let g = &c.gradcheck;
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let mut u = problem.zero_controls();
    for v in u.values_mut() {
        *v = if g.amplitude > 0.0 { rng.gen_range(-g.amplitude..=g.amplitude) } else { 0.0 };
    }
    let errors = |p: &DiscriminationProblem, u: &ControlField| -> Result<(f64, f64, f64)> {
        let fd = finite_difference_gradient(p, u, &objective, g.step)?;
        let exact = objective_gradient(p, u, &objective, GradientMode::Exact)?;
        let truncated = objective_gradient(p, u, &objective, GradientMode::Truncated)?;
        Ok((max_relative_error(&exact, &fd), max_relative_error(&truncated, &fd), exact.max_abs()))
    };
    let (exact, truncated, max_abs_gradient) = errors(&problem, &u)?;
    let (fine, v) = refine(&problem, &u)?;
    let (_, truncated_half_step, _) = errors(&fine, &v)?;
    let report = GradcheckReport {
        exact,
        truncated,
        truncated_half_step,
        truncated_ratio: truncated / truncated_half_step,
        max_abs_gradient,
        tolerance: g.tolerance,
    };
    io::write_json(&run.out.join("gradcheck.json"), &report)?;
    run.write_config_copy()?;
    run.write_meta(started)?;
    let status = if exact <= g.tolerance { Status::Converged } else { Status::CheckFailed };
    Ok((status, report))
}

pub fn cmd_trajectory(config_path: &Path, controls: Option<&Path>, overrides: &Overrides) -> Result<Status> {
    let started = Instant::now();
    let run = Run::prepare(config_path, overrides)?;
    let problem = run.problem()?;
    let u = match controls {
        Some(path) => io::read_pulse(path)?,
        None => problem.zero_controls(),
    };
    problem.check_controls(&u).map_err(|e| ConfigError::Invalid { key: "controls", reason: e.to_string() })?;
    let [t0, t1] = bloch_trajectories(&problem, &u)?;
    io::write_trajectory(&run.out.join("trajectory_h0.csv"), &t0)?;
    io::write_trajectory(&run.out.join("trajectory_h1.csv"), &t1)?;
    run.write_config_copy()?;
    run.write_meta(started)?;
    Ok(Status::Converged)
}

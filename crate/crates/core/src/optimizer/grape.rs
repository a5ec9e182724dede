//! Steepest-ascent GRAPE with an exact line search along the gradient.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use super::objective::{final_errors, objective_value, value_and_gradient, GradientMode, Objective};
use super::OptimizationResult;
use crate::error::{Error, Result};
use crate::problem::{ControlField, DiscriminationProblem};

const GOLDEN: f64 = 1.618_033_988_749_895;
const INV_GOLDEN: f64 = 0.618_033_988_749_895;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LineSearchOptions {
    /// Relative width at which the golden-section refinement stops.
    pub tolerance: f64,
    /// Sufficient-increase constant for the backtracking fallback.
    pub armijo: f64,
    /// Cap on bracket expansions or backtracking halvings.
    pub max_steps: usize,
    /// First trial step, as the largest amplitude change it causes.
    pub initial_move: f64,
}

impl Default for LineSearchOptions {
    fn default() -> Self {
        Self { tolerance: 1e-4, armijo: 1e-4, max_steps: 60, initial_move: 0.1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GrapeOptions {
    /// Stop once successive objective values differ by less than this.
    pub threshold: f64,
    pub max_iterations: usize,
    pub gradient: GradientMode,
    pub line_search: LineSearchOptions,
    /// Optional clamp `|u_{k,n}| <= bound`.
    pub amplitude_bound: Option<f64>,
    pub seed: u64,
}

impl Default for GrapeOptions {
    fn default() -> Self {
        Self {
            threshold: 1e-6,
            max_iterations: 2000,
            gradient: GradientMode::Exact,
            line_search: LineSearchOptions::default(),
            amplitude_bound: None,
            seed: 0,
        }
    }
}

impl GrapeOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return Err(invalid("threshold", "must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(invalid("max_iterations", "must be at least 1"));
        }
        if let Some(b) = self.amplitude_bound {
            if !(b > 0.0) {
                return Err(invalid("amplitude_bound", "must be positive"));
            }
        }
        let ls = &self.line_search;
        if !(ls.tolerance > 0.0 && ls.tolerance < 1.0) {
            return Err(invalid("line_search.tolerance", "must lie in (0, 1)"));
        }
        if !(ls.initial_move > 0.0) || ls.max_steps == 0 || !(ls.armijo >= 0.0 && ls.armijo < 1.0) {
            return Err(invalid("line_search", "invalid parameters"));
        }
        Ok(())
    }
}

pub(crate) fn invalid(option: &'static str, reason: &str) -> Error {
    Error::InvalidOption { option, reason: alloc::string::String::from(reason) }
}

pub(crate) fn clamp_field(u: &mut ControlField, bound: Option<f64>) {
    if let Some(b) = bound {
        for v in u.values_mut() {
            *v = v.clamp(-b, b);
        }
    }
}

/// Maximizes `phi` along `ε > 0` starting from `phi(0) = f0`.
///
/// Brackets a maximum by expanding (or backtracking from) `first`, then
/// narrows it with Brent's method until the bracket is `tolerance`-small
/// relative to the step. Returns `None` when no step increases `phi`.
pub(crate) fn line_search(
    mut phi: impl FnMut(f64) -> Result<f64>,
    f0: f64,
    slope: f64,
    first: f64,
    opts: &LineSearchOptions,
) -> Result<Option<(f64, f64)>> {
    let (mut a, mut b) = (0.0, first);
    let mut fb = phi(b)?;
    let mut c;
    if fb <= f0 {
        // Backtrack towards zero; the last non-improving step closes the bracket.
        let mut found = false;
        c = b;
        for _ in 0..opts.max_steps {
            b *= INV_GOLDEN * INV_GOLDEN;
            fb = phi(b)?;
            if fb > f0 {
                found = true;
                break;
            }
            c = b;
        }
        if !found {
            return Ok(None);
        }
        if fb < f0 + opts.armijo * b * slope {
            // Too little gain to be worth refining around.
            return Ok(Some((b, fb)));
        }
    } else {
        c = b + GOLDEN * (b - a);
        let mut fc = phi(c)?;
        let mut expansions = 0;
        while fc > fb {
            a = b;
            b = c;
            fb = fc;
            c = b + GOLDEN * (b - a);
            fc = phi(c)?;
            expansions += 1;
            if expansions >= opts.max_steps {
                return Ok(Some((b, fb)));
            }
        }
    }
    brent(&mut phi, a, b, fb, c, opts.tolerance).map(Some)
}

/// Brent's method on a bracket `a < b < c` with `phi(b)` above both ends:
/// golden sections, accelerated by parabolic steps whenever they behave.
fn brent(
    phi: &mut impl FnMut(f64) -> Result<f64>,
    mut a: f64,
    b: f64,
    fb: f64,
    mut c: f64,
    tolerance: f64,
) -> Result<(f64, f64)> {
    const CGOLD: f64 = 1.0 - INV_GOLDEN;
    let (mut x, mut w, mut v) = (b, b, b);
    let (mut fx, mut fw, mut fv) = (fb, fb, fb);
    let (mut d, mut e) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let m = 0.5 * (a + c);
        let tol1 = tolerance * x.abs() + 1e-300;
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (c - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            // Parabola through (v, w, x), written for maximization.
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let e_prev = e;
            e = d;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (c - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || c - u < tol2 {
                    d = if m >= x { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= m { a - x } else { c - x };
            d = CGOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + if d >= 0.0 { tol1 } else { -tol1 } };
        let fu = phi(u)?;
        if fu >= fx {
            if u >= x {
                a = x;
            } else {
                c = x;
            }
            (v, fv) = (w, fw);
            (w, fw) = (x, fx);
            (x, fx) = (u, fu);
        } else {
            if u < x {
                a = u;
            } else {
                c = u;
            }
            if fu >= fw || w == x {
                (v, fv) = (w, fw);
                (w, fw) = (u, fu);
            } else if fu >= fv || v == x || v == w {
                (v, fv) = (u, fu);
            }
        }
    }
    Ok((x, fx))
}

/// Gradient ascent on `objective` from `init`.
pub fn grape(
    problem: &DiscriminationProblem,
    objective: &Objective,
    init: &ControlField,
    options: &GrapeOptions,
) -> Result<OptimizationResult> {
    options.validate()?;
    problem.check_controls(init)?;
    let mut u = init.clone();
    clamp_field(&mut u, options.amplitude_bound);
    let mut f = objective_value(problem, &u, objective)?;
    if !f.is_finite() {
        return Err(Error::NonFiniteObjective { iteration: 0 });
    }
    let mut trace = vec![f];
    let mut converged = false;
    let mut iterations = 0;
    let mut step_hint: Option<f64> = None;
    let mut trial = u.clone();
    while iterations < options.max_iterations {
        let (_, grad) = value_and_gradient(problem, &u, objective, options.gradient)?;
        let g = grad.values();
        let norm_sq: f64 = g.iter().map(|x| x * x).sum();
        let g_max = grad.max_abs();
        if !norm_sq.is_finite() {
            return Err(Error::NonFiniteObjective { iteration: iterations });
        }
        if norm_sq.sqrt() < 1e-12 {
            converged = true;
            break;
        }
        let first = step_hint.unwrap_or(options.line_search.initial_move / g_max);
        let iteration = iterations;
        let mut phi = |eps: f64| -> Result<f64> {
            for ((t, base), gi) in trial.values_mut().iter_mut().zip(u.values()).zip(g) {
                *t = base + eps * gi;
            }
            clamp_field(&mut trial, options.amplitude_bound);
            let v = objective_value(problem, &trial, objective)?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFiniteObjective { iteration })
            }
        };
        let Some((eps, f_new)) = line_search(&mut phi, f, norm_sq, first, &options.line_search)? else {
            // No step along the gradient improves the objective: stationary to search precision.
            converged = true;
            break;
        };
        for (ui, gi) in u.values_mut().iter_mut().zip(g) {
            *ui += eps * gi;
        }
        clamp_field(&mut u, options.amplitude_bound);
        iterations += 1;
        trace.push(f_new);
        step_hint = Some(2.0 * eps);
        let change = (f_new - f).abs();
        f = f_new;
        if change < options.threshold {
            converged = true;
            break;
        }
    }
    finish(problem, u, f, trace, iterations, converged, options.seed)
}

pub(crate) fn finish(
    problem: &DiscriminationProblem,
    controls: ControlField,
    objective: f64,
    trace: Vec<f64>,
    iterations: usize,
    converged: bool,
    seed: u64,
) -> Result<OptimizationResult> {
    let (helstrom_error, fixed_local_error) = final_errors(problem, &controls)?;
    Ok(OptimizationResult {
        controls,
        trace,
        objective,
        helstrom_error,
        fixed_local_error,
        iterations,
        converged,
        wall_clock_seconds: None,
        seed,
        restart: Some(0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{make_problem, NoiseModel};
    use crate::problem::Measurement;
    use core::f64::consts::PI;

    #[test]
    fn line_search_finds_parabola_peak() {
        let opts = LineSearchOptions::default();
        let phi = |x: f64| Ok(1.0 - (x - 0.7) * (x - 0.7));
        let (x, f) = line_search(phi, 0.51, 1.4, 0.05, &opts).unwrap().unwrap();
        assert!((x - 0.7).abs() < 1e-3);
        assert!(f > 0.999);
        // Start beyond the peak: backtracking then refinement.
        let (x, _) = line_search(phi, 0.51, 1.4, 10.0, &opts).unwrap().unwrap();
        assert!((x - 0.7).abs() < 0.05, "{x}");
    }

    #[test]
    fn line_search_reports_no_ascent() {
        let phi = |x: f64| Ok(-x);
        assert!(line_search(phi, 0.0, 1.0, 1.0, &LineSearchOptions::default()).unwrap().is_none());
    }

    #[test]
    fn options_validation() {
        let bad = GrapeOptions { threshold: 0.0, ..GrapeOptions::default() };
        assert!(bad.validate().is_err());
        let bad = GrapeOptions { max_iterations: 0, ..GrapeOptions::default() };
        assert!(bad.validate().is_err());
        assert!(GrapeOptions::default().validate().is_ok());
    }

    #[test]
    fn stationary_start_returns_immediately() {
        // γ = 0, T = π/2 is a maximum of D at zero control: ρ₀ = |+⟩, ρ₁ = |−⟩.
        let p = make_problem(NoiseModel::parallel(0.0), PI / 2.0, 20, 0.0, Measurement::Helstrom).unwrap();
        let r = grape(&p, &Objective::hilbert_schmidt(), &p.zero_controls(), &GrapeOptions::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 0);
        assert_eq!(r.trace.len(), 1);
    }

    #[test]
    fn unitary_quarter_period_stays_error_free() {
        let p = make_problem(NoiseModel::parallel(0.0), PI / 2.0, 32, 0.0, Measurement::Helstrom).unwrap();
        let r = grape(&p, &Objective::hilbert_schmidt(), &p.constant_controls(0.01), &GrapeOptions::default()).unwrap();
        assert!(r.helstrom_error <= 1e-6, "{}", r.helstrom_error);
    }

    #[test]
    fn ascent_is_monotone_and_deterministic() {
        let p = make_problem(NoiseModel::transverse(0.1), 3.0, 60, 0.0, Measurement::Helstrom).unwrap();
        let opts = GrapeOptions { max_iterations: 40, ..GrapeOptions::default() };
        let a = grape(&p, &Objective::hilbert_schmidt(), &p.constant_controls(0.01), &opts).unwrap();
        assert!(a.trace.windows(2).all(|w| w[1] >= w[0]));
        let b = grape(&p, &Objective::hilbert_schmidt(), &p.constant_controls(0.01), &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn amplitude_bound_is_respected() {
        let p = make_problem(NoiseModel::parallel(0.1), 3.0, 60, 0.0, Measurement::Helstrom).unwrap();
        let opts = GrapeOptions { max_iterations: 30, amplitude_bound: Some(0.5), ..GrapeOptions::default() };
        let r = grape(&p, &Objective::hilbert_schmidt(), &p.constant_controls(0.01), &opts).unwrap();
        assert!(r.controls.max_abs() <= 0.5);
    }
}

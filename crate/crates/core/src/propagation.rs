//! Piecewise-constant Lindblad evolution and per-slice propagator derivatives.

use alloc::vec::Vec;


use crate::error::{Error, Result};
use crate::linalg::{Mat8, ZERO};
use crate::problem::{ControlField, DiscriminationProblem};
use crate::quantum::{control_generator_term, DensityMatrix, HermitianOperator, Superoperator};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryPoint {
    pub time: f64,
    pub state: DensityMatrix,
}

/// States at every slice boundary, `N + 1` points starting from `ρ(0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
}

impl Trajectory {
    pub fn last(&self) -> &DensityMatrix {
        &self.points[self.points.len() - 1].state
    }
}

fn check_step(dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidGrid { reason: "time step must be positive and finite" });
    }
    Ok(())
}

fn check_finite(l: &Superoperator) -> Result<()> {
    if !l.matrix().is_finite() {
        return Err(Error::NonFinite { what: "generator" });
    }
    Ok(())
}

/// `e^{Δt L}`
pub fn step_propagator(l: &Superoperator, dt: f64) -> Result<Superoperator> {
    check_step(dt)?;
    check_finite(l)?;
    Ok(Superoperator(l.matrix().scale_real(dt).expm()))
}

/// Generator of every slice: drift plus `Σ_k u_{k,n} ∂L/∂u_k`.
pub(crate) fn slice_generators(
    problem: &DiscriminationProblem,
    hypothesis: usize,
    detuning: f64,
    controls: &ControlField,
) -> Result<Vec<Superoperator>> {
    problem.check_controls(controls)?;
    let drift = problem.drift_generator(hypothesis, detuning)?;
    let terms = problem.control_generators();
    Ok((0..problem.grid().slices())
        .map(|n| {
            terms
                .iter()
                .enumerate()
                .fold(drift, |acc, (k, term)| acc + term.scale(controls.get(k, n)))
        })
        .collect())
}

pub(crate) fn evolve_detuned(
    problem: &DiscriminationProblem,
    hypothesis: usize,
    detuning: f64,
    controls: &ControlField,
    record: bool,
) -> Result<(DensityMatrix, Option<Trajectory>)> {
    let generators = slice_generators(problem, hypothesis, detuning, controls)?;
    let dt = problem.grid().dt();
    let mut state = problem.initial().vec();
    let mut points = Vec::new();
    if record {
        points.reserve(generators.len() + 1);
        points.push(TrajectoryPoint { time: 0.0, state: *problem.initial() });
    }
    for (n, l) in generators.iter().enumerate() {
        state = step_propagator(l, dt)?.apply_vec(&state);
        if record {
            points.push(TrajectoryPoint {
                time: problem.grid().slice_start(n + 1),
                state: DensityMatrix::from_vec(&state),
            });
        }
    }
    let last = DensityMatrix::from_vec(&state);
    Ok((last, record.then_some(Trajectory { points })))
}

/// `ρ_j(T) = Π_n e^{Δt L_n} ρ(0)` at the problem's own detuning, optionally
/// with every intermediate state.
pub fn evolve(
    problem: &DiscriminationProblem,
    hypothesis: usize,
    controls: &ControlField,
    record: bool,
) -> Result<(DensityMatrix, Option<Trajectory>)> {
    evolve_detuned(problem, hypothesis, problem.detuning(), controls, record)
}

/// Exact derivative of `e^{Δt L}` along the control term `H_c`, read off the
/// top-right block of `exp([[ΔtL, Δt ∂L/∂u], [0, ΔtL]])`.
pub fn step_derivative_exact(l: &Superoperator, h_c: &HermitianOperator, dt: f64) -> Result<Superoperator> {
    check_step(dt)?;
    check_finite(l)?;
    let a = l.matrix().scale_real(dt);
    let e = control_generator_term(h_c).matrix().scale_real(dt);
    let block = Mat8::from_fn(|r, c| match (r < 4, c < 4) {
        (true, true) => a.0[r][c],
        (true, false) => e.0[r][c - 4],
        (false, false) => a.0[r - 4][c - 4],
        (false, true) => ZERO,
    })
    .expm();
    Ok(Superoperator(crate::linalg::Mat4::from_fn(|r, c| block.0[r][c + 4])))
}

/// Second-order series for the same derivative:
/// `−i(K₀₀ + K₀₁ + K₁₀)·e^{ΔtL}` with `K₀₀ = Δt H^×`, `K₀₁ = −(Δt²/2) H^× L`,
/// `K₁₀ = +(Δt²/2) L H^×`. The local error is `O(Δt³)`.
pub fn step_derivative_truncated(l: &Superoperator, h_c: &HermitianOperator, dt: f64) -> Result<Superoperator> {
    let propagator = step_propagator(l, dt)?;
    Ok(Superoperator(truncated_series(l, &control_generator_term(h_c), dt) * propagator.0))
}

/// `−i(K₀₀ + K₀₁ + K₁₀)` given `∂L/∂u = −iH^×`.
pub(crate) fn truncated_series(l: &Superoperator, dl: &Superoperator, dt: f64) -> crate::linalg::Mat4 {
    // −iH^× = dl, so −iK₀₀ = Δt·dl, −iK₀₁ = −(Δt²/2) dl·L, −iK₁₀ = (Δt²/2) L·dl.
    let first = dl.0.scale_real(dt);
    let second = (l.0 * dl.0 - dl.0 * l.0).scale_real(0.5 * dt * dt);
    first + second
}

/// Per-slice propagators `e^{Δt L_n}` for one hypothesis.
#[derive(Clone, Debug, PartialEq)]
pub struct Propagators {
    steps: Vec<Superoperator>,
}

impl Propagators {
    pub fn steps(&self) -> &[Superoperator] {
        &self.steps
    }

    /// Map from the state after `from` slices to the state after `to` slices.
    pub fn span(&self, from: usize, to: usize) -> Superoperator {
        self.steps[from..to]
            .iter()
            .fold(Superoperator::identity(), |acc, p| p.compose(&acc))
    }

    /// `[span(n, N) for n in 0..=N]`, accumulated right to left.
    pub fn suffix_products(&self) -> Vec<Superoperator> {
        let n = self.steps.len();
        let mut out = alloc::vec![Superoperator::identity(); n + 1];
        for i in (0..n).rev() {
            out[i] = out[i + 1].compose(&self.steps[i]);
        }
        out
    }

    pub fn apply(&self, rho: &DensityMatrix) -> DensityMatrix {
        let v = self.steps.iter().fold(rho.vec(), |v, p| p.apply_vec(&v));
        DensityMatrix::from_vec(&v)
    }
}

pub fn accumulate_propagators(
    problem: &DiscriminationProblem,
    hypothesis: usize,
    controls: &ControlField,
) -> Result<Propagators> {
    let dt = problem.grid().dt();
    let steps = slice_generators(problem, hypothesis, problem.detuning(), controls)?
        .iter()
        .map(|l| step_propagator(l, dt))
        .collect::<Result<Vec<_>>>()?;
    Ok(Propagators { steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrimination::helstrom_error;
    use crate::linalg::{Mat4, C64};
    use crate::problem::{Measurement, TimeGrid};
    use crate::quantum::{
        bloch_from_density, lindblad_generator, sigma_x, sigma_y, sigma_z, CollapseOperator, OperatorRole,
    };
    use alloc::string::ToString;
    use alloc::vec;
    use core::f64::consts::PI;

    fn hyp(m: crate::linalg::Mat2) -> HermitianOperator {
        HermitianOperator::hypothesis(m).unwrap()
    }

    fn dephasing_problem(gamma: f64, total_time: f64, slices: usize) -> DiscriminationProblem {
        DiscriminationProblem::new(
            HermitianOperator::zero(OperatorRole::Hypothesis),
            hyp(sigma_z()),
            0.0,
            vec![CollapseOperator::new(sigma_z(), gamma / 2.0).unwrap()],
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

    #[test]
    fn zero_generator_gives_identity() {
        let p = step_propagator(&Superoperator::zero(), 0.37).unwrap();
        assert_eq!(p, Superoperator::identity());
    }

    #[test]
    fn half_turn_maps_plus_to_minus() {
        let l = lindblad_generator(&hyp(sigma_z()), &[]).unwrap();
        let p = step_propagator(&l, PI / 2.0).unwrap();
        let out = p.apply_state(&DensityMatrix::plus());
        assert!((*out.matrix() - *DensityMatrix::minus().matrix()).max_abs() < 1e-14);
    }

    #[test]
    fn dephasing_step_scales_coherence() {
        let l = lindblad_generator(
            &HermitianOperator::zero(OperatorRole::Hypothesis),
            &[CollapseOperator::new(sigma_z(), 0.05).unwrap()],
        )
        .unwrap();
        let out = step_propagator(&l, 1.0).unwrap().apply_state(&DensityMatrix::plus());
        assert!((bloch_from_density(&out).x - (-0.1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn step_propagator_matches_doubled_half_step() {
        let l = lindblad_generator(
            &hyp(sigma_z() + sigma_x().scale_real(3.0) - sigma_y().scale_real(1.2)),
            &[CollapseOperator::new(sigma_x(), 0.2).unwrap()],
        )
        .unwrap();
        for dt in [0.05, 0.5, 2.0] {
            let full = step_propagator(&l, dt).unwrap();
            let half = step_propagator(&l, dt / 2.0).unwrap();
            let twice = half.compose(&half);
            assert!((full.0 - twice.0).max_abs() <= 1e-12 * full.0.max_abs());
        }
    }

    #[test]
    fn step_propagator_rejects_bad_input() {
        assert!(step_propagator(&Superoperator::zero(), 0.0).is_err());
        let mut bad = Mat4::zeros();
        bad.0[1][2] = C64::new(f64::NAN, 0.0);
        assert!(step_propagator(&Superoperator(bad), 0.1).is_err());
    }

    #[test]
    fn single_free_slice_leaves_state_unchanged() {
        let problem = dephasing_problem(0.0, 1.0, 1);
        let (out, _) = evolve(&problem, 0, &problem.zero_controls(), false).unwrap();
        assert_eq!(out, DensityMatrix::plus());
    }

    #[test]
    fn uncontrolled_dephasing_closed_form() {
        let problem = dephasing_problem(0.1, 2.0, 40);
        let (rho1, _) = evolve(&problem, 1, &problem.zero_controls(), false).unwrap();
        let b = bloch_from_density(&rho1);
        let decay = (-0.2f64).exp();
        assert!((b.x - decay * 4f64.cos()).abs() < 1e-12);
        assert!((b.y - decay * 4f64.sin()).abs() < 1e-12);
        assert!(b.z.abs() < 1e-12);
    }

    #[test]
    fn quarter_period_is_error_free() {
        let problem = dephasing_problem(0.0, PI / 2.0, 16);
        let z = problem.zero_controls();
        let (r0, _) = evolve(&problem, 0, &z, false).unwrap();
        let (r1, _) = evolve(&problem, 1, &z, false).unwrap();
        assert!(helstrom_error(&r0, &r1) < 1e-12);
    }

    #[test]
    fn evolve_rejects_wrong_shape() {
        let problem = dephasing_problem(0.1, 1.0, 10);
        let wrong = ControlField::zeros(&["x", "y"], 9);
        assert!(matches!(evolve(&problem, 0, &wrong, false), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn trajectory_endpoint_is_bitwise_final_state() {
        let problem = dephasing_problem(0.1, 3.0, 30);
        let mut u = problem.zero_controls();
        for n in 0..30 {
            u.set(0, n, 0.3 * (n as f64).sin());
            u.set(1, n, -0.2);
        }
        let (last, traj) = evolve(&problem, 1, &u, true).unwrap();
        let traj = traj.unwrap();
        assert_eq!(traj.points.len(), 31);
        assert_eq!(traj.points[0].state, DensityMatrix::plus());
        assert_eq!(*traj.last(), last);
    }

    #[test]
    fn refining_within_slices_keeps_result() {
        let coarse = dephasing_problem(0.1, 2.0, 10);
        let fine = dephasing_problem(0.1, 2.0, 40);
        let mut uc = coarse.zero_controls();
        let mut uf = fine.zero_controls();
        for n in 0..10 {
            let (a, b) = (0.5 * n as f64 - 2.0, 1.0 / (1.0 + n as f64));
            uc.set(0, n, a);
            uc.set(1, n, b);
            for m in 0..4 {
                uf.set(0, 4 * n + m, a);
                uf.set(1, 4 * n + m, b);
            }
        }
        let (rc, _) = evolve(&coarse, 1, &uc, false).unwrap();
        let (rf, _) = evolve(&fine, 1, &uf, false).unwrap();
        assert!((*rc.matrix() - *rf.matrix()).max_abs() < 1e-12);
    }

    #[test]
    fn long_evolution_stays_physical() {
        let problem = dephasing_problem(0.3, 20.0, 400);
        let mut u = problem.zero_controls();
        for n in 0..400 {
            u.set(0, n, 4.0 * (0.1 * n as f64).sin());
            u.set(1, n, 3.0 * (0.07 * n as f64).cos());
        }
        for j in 0..2 {
            let (rho, _) = evolve(&problem, j, &u, false).unwrap();
            rho.validate(1e-8, 1e-8, 1e-8).unwrap();
        }
    }

    #[test]
    fn derivative_with_zero_control_is_zero() {
        let l = lindblad_generator(&hyp(sigma_z()), &[CollapseOperator::new(sigma_x(), 0.1).unwrap()]).unwrap();
        let zero = HermitianOperator::zero(OperatorRole::Control);
        assert_eq!(step_derivative_exact(&l, &zero, 0.1).unwrap(), Superoperator::zero());
        assert_eq!(step_derivative_truncated(&l, &zero, 0.1).unwrap().0.max_abs(), 0.0);
    }

    #[test]
    fn derivative_at_zero_generator() {
        let hc = HermitianOperator::control(sigma_y()).unwrap();
        let d = step_derivative_exact(&Superoperator::zero(), &hc, 0.3).unwrap();
        let want = control_generator_term(&hc).scale(0.3);
        assert!((d.0 - want.0).max_abs() < 1e-15);
    }

    /// Midpoint-rule quadrature of ∫₀¹ e^{sA} E e^{(1−s)A} ds, independent of the block trick.
    fn quadrature_derivative(l: &Superoperator, hc: &HermitianOperator, dt: f64, points: usize) -> Mat4 {
        let a = l.0.scale_real(dt);
        let e = control_generator_term(hc).0.scale_real(dt);
        let h = 1.0 / points as f64;
        let mut acc = Mat4::zeros();
        for i in 0..points {
            let s = (i as f64 + 0.5) * h;
            acc += a.scale_real(s).expm() * e * a.scale_real(1.0 - s).expm();
        }
        acc.scale_real(h)
    }

    #[test]
    fn commuting_derivative_factorizes() {
        let l = lindblad_generator(&hyp(sigma_z().scale_real(1.3)), &[]).unwrap();
        let hc = HermitianOperator::control(sigma_z()).unwrap();
        let dt = 0.4;
        let exact = step_derivative_exact(&l, &hc, dt).unwrap();
        let factored = control_generator_term(&hc).scale(dt).0 * step_propagator(&l, dt).unwrap().0;
        assert!((exact.0 - factored).max_abs() < 1e-13);
        let quad = quadrature_derivative(&l, &hc, dt, 10_000);
        assert!((exact.0 - quad).max_abs() < 1e-8);
        // Commuting terms: the second-order series is exact up to its own truncation.
        let trunc = step_derivative_truncated(&l, &hc, dt).unwrap();
        assert!((trunc.0 - exact.0).max_abs() < dt.powi(3));
    }

    #[test]
    fn exact_derivative_matches_quadrature() {
        let l = lindblad_generator(
            &hyp(sigma_z() + sigma_x().scale_real(0.7)),
            &[CollapseOperator::new(sigma_x(), 0.15).unwrap()],
        )
        .unwrap();
        let hc = HermitianOperator::control(sigma_y()).unwrap();
        let exact = step_derivative_exact(&l, &hc, 0.5).unwrap();
        let quad = quadrature_derivative(&l, &hc, 0.5, 10_000);
        // Midpoint rule error is O(h²) ≈ 1e-9 here.
        assert!((exact.0 - quad).max_abs() < 1e-8);
    }

    #[test]
    fn truncated_derivative_is_third_order() {
        let l = lindblad_generator(
            &hyp(sigma_z() + sigma_x().scale_real(0.8) - sigma_y().scale_real(0.4)),
            &[CollapseOperator::new(sigma_z(), 0.05).unwrap()],
        )
        .unwrap();
        let hc = HermitianOperator::control(sigma_x()).unwrap();
        let err = |dt: f64| {
            let e = step_derivative_exact(&l, &hc, dt).unwrap();
            let t = step_derivative_truncated(&l, &hc, dt).unwrap();
            (e.0 - t.0).max_abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!((ratio - 8.0).abs() < 0.8, "ratio {ratio}");
    }

    #[test]
    fn propagator_products_compose() {
        let problem = dephasing_problem(0.2, 2.0, 12);
        let mut u = problem.zero_controls();
        for n in 0..12 {
            u.set(0, n, 0.1 * n as f64);
            u.set(1, n, 1.0 - 0.05 * n as f64);
        }
        let props = accumulate_propagators(&problem, 1, &u).unwrap();
        let (direct, _) = evolve(&problem, 1, &u, false).unwrap();
        let via = props.span(0, 12).apply_state(problem.initial());
        assert!((*direct.matrix() - *via.matrix()).max_abs() < 1e-14);
        let suffix = props.suffix_products();
        for split in [0, 3, 7, 12] {
            let joined = suffix[split].compose(&props.span(0, split));
            assert!((joined.0 - suffix[0].0).max_abs() < 1e-13);
        }
        let one = accumulate_propagators(&dephasing_problem(0.2, 2.0, 1), 0, &ControlField::zeros(&["x", "y"], 1)).unwrap();
        assert_eq!(one.steps().len(), 1);
    }
}

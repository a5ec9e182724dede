//! Error probabilities for telling two qubit states apart.


use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen2, projector, Mat2, Matrix, C64, ONE, ZERO};
use crate::quantum::DensityMatrix;

const POVM_TOL: f64 = 1e-10;

/// Two-outcome measurement; outcome `j` means "accept hypothesis j".
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Povm {
    e0: Mat2,
    e1: Mat2,
}

impl Povm {
    pub fn new(e0: Mat2, e1: Mat2) -> Result<Self> {
        for e in [&e0, &e1] {
            if !e.is_finite() {
                return Err(Error::InvalidPovm { reason: "non-finite element" });
            }
            if e.hermiticity_defect() > POVM_TOL {
                return Err(Error::InvalidPovm { reason: "element is not Hermitian" });
            }
            let (vals, _) = hermitian_eigen2(e);
            if vals[0] < -POVM_TOL || vals[1] > 1.0 + POVM_TOL {
                return Err(Error::InvalidPovm { reason: "element eigenvalues outside [0, 1]" });
            }
        }
        if (e0 + e1 - Mat2::identity()).max_abs() > POVM_TOL {
            return Err(Error::InvalidPovm { reason: "elements do not sum to the identity" });
        }
        Ok(Self { e0, e1 })
    }

    /// `E_0 = |+⟩⟨+|`, `E_1 = |−⟩⟨−|`.
    pub fn plus_minus() -> Self {
        Self {
            e0: *DensityMatrix::plus().matrix(),
            e1: *DensityMatrix::minus().matrix(),
        }
    }

    /// `E_0 = |0⟩⟨0|`, `E_1 = |1⟩⟨1|`.
    pub fn computational() -> Self {
        Self {
            e0: Matrix([[ONE, ZERO], [ZERO, ZERO]]),
            e1: Matrix([[ZERO, ZERO], [ZERO, ONE]]),
        }
    }

    pub fn e0(&self) -> &Mat2 {
        &self.e0
    }

    pub fn e1(&self) -> &Mat2 {
        &self.e1
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Priors {
    p0: f64,
    p1: f64,
}

impl Priors {
    pub fn new(p0: f64, p1: f64) -> Result<Self> {
        let ok = (0.0..=1.0).contains(&p0) && (0.0..=1.0).contains(&p1) && (p0 + p1 - 1.0).abs() <= 1e-12;
        if !ok {
            return Err(Error::InvalidPriors { p0, p1 });
        }
        Ok(Self { p0, p1 })
    }

    pub fn symmetric() -> Self {
        Self { p0: 0.5, p1: 0.5 }
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    pub fn p1(&self) -> f64 {
        self.p1
    }
}

impl Default for Priors {
    fn default() -> Self {
        Self::symmetric()
    }
}

/// `½‖ρ₀ − ρ₁‖₁` from the eigenvalues of the Hermitian difference.
pub fn trace_distance(rho0: &DensityMatrix, rho1: &DensityMatrix) -> f64 {
    let (vals, _) = hermitian_eigen2(&(*rho0.matrix() - *rho1.matrix()));
    (0.5 * (vals[0].abs() + vals[1].abs())).min(1.0)
}

/// Minimum error over all measurements, `½(1 − D_tr)`, for equal priors.
pub fn helstrom_error(rho0: &DensityMatrix, rho1: &DensityMatrix) -> f64 {
    0.5 * (1.0 - trace_distance(rho0, rho1))
}

/// `π₀ tr(ρ₀E₁) + π₁ tr(ρ₁E₀)`
pub fn fixed_local_error(rho0: &DensityMatrix, rho1: &DensityMatrix, povm: &Povm, priors: &Priors) -> f64 {
    let miss0 = (*rho0.matrix() * povm.e1).trace().re;
    let miss1 = (*rho1.matrix() * povm.e0).trace().re;
    priors.p0 * miss0 + priors.p1 * miss1
}

/// Hilbert–Schmidt surrogate `½ tr[(ρ₀−ρ₁)†(ρ₀−ρ₁)]`.
pub fn hs_objective(rho0: &DensityMatrix, rho1: &DensityMatrix) -> f64 {
    let d = *rho0.matrix() - *rho1.matrix();
    0.5 * d.0.iter().flat_map(|r| r.iter()).map(C64::norm_sqr).sum::<f64>()
}

/// The optimal measurement together with a flag raised when the states coincide.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HelstromMeasurement {
    pub povm: Povm,
    pub degenerate: bool,
}

/// Projective measurement onto the eigenspaces of `ρ₀ − ρ₁`: `E₁` projects
/// onto the negative eigenvector. For identical states the σ_z projectors are
/// returned with `degenerate` set.
pub fn helstrom_povm(rho0: &DensityMatrix, rho1: &DensityMatrix) -> HelstromMeasurement {
    let diff = *rho0.matrix() - *rho1.matrix();
    if diff.max_abs() <= 1e-14 {
        return HelstromMeasurement { povm: Povm::computational(), degenerate: true };
    }
    let (_, vecs) = hermitian_eigen2(&diff);
    let e1 = projector(&vecs[0]);
    let e0 = Mat2::identity() - e1;
    HelstromMeasurement { povm: Povm { e0, e1 }, degenerate: false }
}

/// Weighted mean of per-detuning errors.
pub fn averaged_error(errors: &[f64], weights: &[f64]) -> Result<f64> {
    if errors.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            what: "averaged_error weights",
            expected: errors.len(),
            found: weights.len(),
        });
    }
    check_weights(weights)?;
    Ok(errors.iter().zip(weights).map(|(e, w)| e * w).sum())
}

pub(crate) fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::InvalidWeights { reason: "no weights" });
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidWeights { reason: "weights must be finite and non-negative" });
    }
    if (weights.iter().sum::<f64>() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidWeights { reason: "weights must sum to one" });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{density_from_bloch, BlochVector};
    use core::f64::consts::{FRAC_PI_4, PI};
    use proptest::prelude::*;

    fn rotated_plus(t: f64) -> DensityMatrix {
        // e^{-iσ_z t}|+⟩ has Bloch vector (cos 2t, sin 2t, 0).
        density_from_bloch(&BlochVector::new((2.0 * t).cos(), (2.0 * t).sin(), 0.0)).unwrap()
    }

    #[test]
    fn trace_distance_examples() {
        let p = DensityMatrix::plus();
        assert_eq!(trace_distance(&p, &p), 0.0);
        assert!((trace_distance(&p, &DensityMatrix::minus()) - 1.0).abs() < 1e-15);
        let d = trace_distance(&p, &rotated_plus(FRAC_PI_4 / 2.0));
        // Pure states: √(1 − |⟨ψ₀|ψ₁⟩|²) with |⟨ψ₀|ψ₁⟩|² = cos²(t) at t = π/8.
        let overlap = (PI / 8.0).cos().powi(2);
        assert!((d - (1.0 - overlap).sqrt()).abs() < 1e-14);
        let d = trace_distance(&p, &rotated_plus(FRAC_PI_4));
        assert!((d - FRAC_PI_4.sin()).abs() < 1e-14);
    }

    #[test]
    fn helstrom_examples() {
        let p = DensityMatrix::plus();
        assert_eq!(helstrom_error(&p, &p), 0.5);
        assert!(helstrom_error(&p, &DensityMatrix::minus()).abs() < 1e-15);
    }

    #[test]
    fn fixed_local_examples() {
        let (pm, sym) = (Povm::plus_minus(), Priors::symmetric());
        assert!(fixed_local_error(&DensityMatrix::plus(), &DensityMatrix::minus(), &pm, &sym).abs() < 1e-15);
        let mixed = DensityMatrix::maximally_mixed();
        assert!((fixed_local_error(&mixed, &mixed, &pm, &sym) - 0.5).abs() < 1e-15);
        let e = fixed_local_error(&DensityMatrix::plus(), &rotated_plus(FRAC_PI_4), &pm, &sym);
        assert!((e - 0.25).abs() < 1e-14);
    }

    #[test]
    fn hs_examples() {
        let p = DensityMatrix::plus();
        assert_eq!(hs_objective(&p, &p), 0.0);
        assert!((hs_objective(&p, &DensityMatrix::minus()) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn povm_validation() {
        assert!(Povm::new(Mat2::identity(), Mat2::identity()).is_err());
        assert!(Povm::new(*DensityMatrix::plus().matrix(), *DensityMatrix::minus().matrix()).is_ok());
        let over = Mat2::identity().scale_real(1.5);
        assert!(Povm::new(over, Mat2::identity() - over).is_err());
        assert!(Priors::new(0.3, 0.6).is_err());
        assert!(Priors::new(0.3, 0.7).is_ok());
    }

    #[test]
    fn helstrom_povm_for_orthogonal_pair() {
        let m = helstrom_povm(&DensityMatrix::plus(), &DensityMatrix::minus());
        assert!(!m.degenerate);
        assert!((m.povm.e0 - *DensityMatrix::plus().matrix()).max_abs() < 1e-15);
        assert!((m.povm.e1 - *DensityMatrix::minus().matrix()).max_abs() < 1e-15);
    }

    #[test]
    fn helstrom_povm_degenerate() {
        let p = DensityMatrix::plus();
        let m = helstrom_povm(&p, &p);
        assert!(m.degenerate);
        assert_eq!(m.povm, Povm::computational());
        assert_eq!(fixed_local_error(&p, &p, &m.povm, &Priors::symmetric()), 0.5);
    }

    #[test]
    fn averaged_error_examples() {
        assert_eq!(averaged_error(&[0.3], &[1.0]).unwrap(), 0.3);
        assert!((averaged_error(&[0.2; 4], &[0.25; 4]).unwrap() - 0.2).abs() < 1e-16);
        let third = 1.0 / 3.0;
        assert!((averaged_error(&[0.1, 0.2, 0.3], &[third; 3]).unwrap() - 0.2).abs() < 1e-15);
        assert!(averaged_error(&[0.1, 0.2], &[1.0]).is_err());
        assert!(averaged_error(&[0.1, 0.2], &[0.7, 0.7]).is_err());
    }

    fn arb_state() -> impl Strategy<Value = DensityMatrix> {
        (0.0..1.0f64, 0.0..PI, 0.0..core::f64::consts::TAU).prop_map(|(r, th, ph)| {
            density_from_bloch(&BlochVector::new(r * th.sin() * ph.cos(), r * th.sin() * ph.sin(), r * th.cos()))
                .unwrap()
        })
    }

    fn arb_unitary() -> impl Strategy<Value = Mat2> {
        (0.0..PI, 0.0..core::f64::consts::TAU, 0.0..core::f64::consts::TAU).prop_map(|(a, b, c)| {
            // [[e^{ib}cos a, −e^{−ic}sin a], [e^{ic}sin a, e^{−ib}cos a]]
            let e = |x: f64| C64::new(x.cos(), x.sin());
            Matrix([
                [e(b) * a.cos(), -(e(-c) * a.sin())],
                [e(c) * a.sin(), e(-b) * a.cos()],
            ])
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn hs_equals_squared_trace_distance(a in arb_state(), b in arb_state()) {
            let d = trace_distance(&a, &b);
            prop_assert!((hs_objective(&a, &b) - d * d).abs() < 1e-12);
            prop_assert!(hs_objective(&a, &b) <= d + 1e-15);
        }

        #[test]
        fn helstrom_povm_attains_bound(a in arb_state(), b in arb_state()) {
            let m = helstrom_povm(&a, &b);
            let e = fixed_local_error(&a, &b, &m.povm, &Priors::symmetric());
            prop_assert!((e - helstrom_error(&a, &b)).abs() < 1e-10);
        }

        #[test]
        fn helstrom_is_unitarily_invariant(a in arb_state(), b in arb_state(), u in arb_unitary()) {
            let conj = |r: &DensityMatrix| DensityMatrix::new(u * *r.matrix() * u.adjoint()).unwrap();
            prop_assert!((helstrom_error(&a, &b) - helstrom_error(&conj(&a), &conj(&b))).abs() < 1e-12);
        }
    }
}

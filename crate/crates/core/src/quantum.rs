//! Qubit states, operators and Lindblad generators.
//!
//! Superoperators act on the column-stacked density matrix
//! `vec(ρ) = (ρ₀₀, ρ₁₀, ρ₀₁, ρ₁₁)`, so that `vec(AXB) = (Bᵀ ⊗ A) vec(X)`.
//! Every routine in the crate, gradients included, uses this ordering.
//!
//! Rotation convention: `H = σ_z` generates `d⟨σ_y⟩/dt = +2⟨σ_x⟩`, i.e. the
//! Bloch vector precesses counter-clockwise about +z at angular frequency 2.
//! The basis state |0⟩ is the +z pole.

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{Mat2, Mat4, Matrix, C64, I, ONE, ZERO};

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = 1e-10;
pub const BLOCH_TOL: f64 = 1e-10;

pub fn identity2() -> Mat2 {
    Mat2::identity()
}

pub fn sigma_x() -> Mat2 {
    Matrix([[ZERO, ONE], [ONE, ZERO]])
}

pub fn sigma_y() -> Mat2 {
    Matrix([[ZERO, -I], [I, ZERO]])
}

pub fn sigma_z() -> Mat2 {
    Matrix([[ONE, ZERO], [ZERO, -ONE]])
}

/// Lowering operator `|0⟩⟨1|`: relaxes states towards the +z pole |0⟩.
pub fn sigma_minus() -> Mat2 {
    Matrix([[ZERO, ONE], [ZERO, ZERO]])
}

/// Raising operator `|1⟩⟨0|`.
pub fn sigma_plus() -> Mat2 {
    sigma_minus().adjoint()
}

/// Column-stacking vectorization.
pub fn vectorize(m: &Mat2) -> [C64; 4] {
    [m.0[0][0], m.0[1][0], m.0[0][1], m.0[1][1]]
}

pub fn unvectorize(v: &[C64; 4]) -> Mat2 {
    Matrix([[v[0], v[2]], [v[1], v[3]]])
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn distance(&self, other: &BlochVector) -> f64 {
        BlochVector::new(self.x - other.x, self.y - other.y, self.z - other.z).norm()
    }
}

/// A qubit density matrix.
///
/// [`DensityMatrix::new`] checks Hermiticity, unit trace and positivity.
/// States produced by propagation are carried without re-validation since
/// round-off accumulates below the tolerances; see [`DensityMatrix::validate`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityMatrix(Mat2);

impl DensityMatrix {
    pub fn new(m: Mat2) -> Result<Self> {
        let state = DensityMatrix(m);
        state.validate(HERMITIAN_TOL, TRACE_TOL, PSD_TOL)?;
        Ok(state)
    }

    pub(crate) fn from_vec(v: &[C64; 4]) -> Self {
        DensityMatrix(unvectorize(v))
    }

    /// Pure state `|ψ⟩⟨ψ|` for a (not necessarily normalized) ket.
    pub fn pure(ket: [C64; 2]) -> Result<Self> {
        let n = (ket[0].norm_sqr() + ket[1].norm_sqr()).sqrt();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::InvalidState { reason: "zero or non-finite ket" });
        }
        let k = [ket[0] / n, ket[1] / n];
        Ok(DensityMatrix(crate::linalg::projector(&k)))
    }

    /// `|+⟩⟨+|`, the +x eigenstate.
    pub fn plus() -> Self {
        DensityMatrix(Mat2::from_fn(|_, _| C64::new(0.5, 0.0)))
    }

    /// `|−⟩⟨−|`, the −x eigenstate.
    pub fn minus() -> Self {
        DensityMatrix(Mat2::from_fn(|i, j| C64::new(if i == j { 0.5 } else { -0.5 }, 0.0)))
    }

    pub fn ground() -> Self {
        DensityMatrix(Matrix([[ONE, ZERO], [ZERO, ZERO]]))
    }

    pub fn excited() -> Self {
        DensityMatrix(Matrix([[ZERO, ZERO], [ZERO, ONE]]))
    }

    pub fn maximally_mixed() -> Self {
        DensityMatrix(Mat2::identity().scale_real(0.5))
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.0
    }

    pub fn vec(&self) -> [C64; 4] {
        vectorize(&self.0)
    }

    pub fn purity(&self) -> f64 {
        (self.0 * self.0).trace().re
    }

    pub fn validate(&self, herm_tol: f64, trace_tol: f64, psd_tol: f64) -> Result<()> {
        if !self.0.is_finite() {
            return Err(Error::NonFinite { what: "density matrix" });
        }
        let defect = self.0.hermiticity_defect();
        if defect > herm_tol {
            return Err(Error::NotHermitian { defect });
        }
        let tr = self.0.trace();
        if (tr - ONE).norm() > trace_tol {
            return Err(Error::InvalidState { reason: "trace differs from one" });
        }
        let (vals, _) = crate::linalg::hermitian_eigen2(&self.0);
        if vals[0] < -psd_tol {
            return Err(Error::InvalidState { reason: "negative eigenvalue" });
        }
        Ok(())
    }

    pub fn to_bloch(&self) -> BlochVector {
        bloch_from_density(self)
    }
}

/// `(tr ρσ_x, tr ρσ_y, tr ρσ_z)`
pub fn bloch_from_density(rho: &DensityMatrix) -> BlochVector {
    let m = &rho.0;
    let off = m.0[1][0] + m.0[0][1].conj();
    BlochVector {
        x: off.re,
        y: off.im,
        z: (m.0[0][0] - m.0[1][1]).re,
    }
}

/// `(I + xσ_x + yσ_y + zσ_z)/2`; rejects vectors outside the unit ball.
pub fn density_from_bloch(r: &BlochVector) -> Result<DensityMatrix> {
    let norm = r.norm();
    if !norm.is_finite() || norm > 1.0 + BLOCH_TOL {
        return Err(Error::NonPhysicalBloch { norm });
    }
    Ok(DensityMatrix(Matrix([
        [C64::new(0.5 * (1.0 + r.z), 0.0), C64::new(0.5 * r.x, -0.5 * r.y)],
        [C64::new(0.5 * r.x, 0.5 * r.y), C64::new(0.5 * (1.0 - r.z), 0.0)],
    ])))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorRole {
    Hypothesis,
    Control,
    CollapsePrefactor,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HermitianOperator {
    matrix: Mat2,
    role: OperatorRole,
}

impl HermitianOperator {
    pub fn new(matrix: Mat2, role: OperatorRole) -> Result<Self> {
        if !matrix.is_finite() {
            return Err(Error::NonFinite { what: "operator" });
        }
        if role != OperatorRole::CollapsePrefactor {
            let defect = matrix.hermiticity_defect();
            if defect > HERMITIAN_TOL {
                return Err(Error::NotHermitian { defect });
            }
        }
        Ok(Self { matrix, role })
    }

    pub fn hypothesis(matrix: Mat2) -> Result<Self> {
        Self::new(matrix, OperatorRole::Hypothesis)
    }

    pub fn control(matrix: Mat2) -> Result<Self> {
        Self::new(matrix, OperatorRole::Control)
    }

    pub fn zero(role: OperatorRole) -> Self {
        Self { matrix: Mat2::zeros(), role }
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.matrix
    }

    pub fn role(&self) -> OperatorRole {
        self.role
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { matrix: self.matrix.scale_real(s), role: self.role }
    }
}

/// A dissipation channel `rate · (LρL† − ½{L†L, ρ})` with the bare operator
/// `L` stored apart from its rate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollapseOperator {
    operator: Mat2,
    rate: f64,
}

impl CollapseOperator {
    pub fn new(operator: Mat2, rate: f64) -> Result<Self> {
        if !operator.is_finite() {
            return Err(Error::NonFinite { what: "collapse operator" });
        }
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(Error::NegativeRate { rate });
        }
        Ok(Self { operator, rate })
    }

    pub fn operator(&self) -> &Mat2 {
        &self.operator
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// `√rate · L`
    pub fn scaled_operator(&self) -> Mat2 {
        self.operator.scale_real(self.rate.sqrt())
    }
}

/// Linear map on column-stacked qubit density matrices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Superoperator(pub Mat4);

impl Superoperator {
    pub fn zero() -> Self {
        Superoperator(Mat4::zeros())
    }

    pub fn identity() -> Self {
        Superoperator(Mat4::identity())
    }

    pub fn matrix(&self) -> &Mat4 {
        &self.0
    }

    pub fn apply_vec(&self, v: &[C64; 4]) -> [C64; 4] {
        self.0.mul_vec(v)
    }

    pub fn apply(&self, m: &Mat2) -> Mat2 {
        unvectorize(&self.0.mul_vec(&vectorize(m)))
    }

    pub fn apply_state(&self, rho: &DensityMatrix) -> DensityMatrix {
        DensityMatrix(self.apply(&rho.0))
    }

    /// `self ∘ rhs`, i.e. `rhs` acts first.
    pub fn compose(&self, rhs: &Superoperator) -> Superoperator {
        Superoperator(self.0 * rhs.0)
    }

    pub fn scale(&self, s: f64) -> Superoperator {
        Superoperator(self.0.scale_real(s))
    }

    /// Size of `vec(I)† · self`, which vanishes for trace-preserving generators.
    pub fn trace_defect(&self) -> f64 {
        (0..4)
            .map(|c| (self.0 .0[0][c] + self.0 .0[3][c]).norm())
            .fold(0.0, f64::max)
    }
}

impl core::ops::Add for Superoperator {
    type Output = Superoperator;
    fn add(self, rhs: Superoperator) -> Superoperator {
        Superoperator(self.0 + rhs.0)
    }
}

impl core::ops::Sub for Superoperator {
    type Output = Superoperator;
    fn sub(self, rhs: Superoperator) -> Superoperator {
        Superoperator(self.0 - rhs.0)
    }
}

/// `−i(I⊗H − Hᵀ⊗I)`, the vectorized form of `ρ ↦ −i[H, ρ]`.
fn commutator_term(h: &Mat2) -> Mat4 {
    let id = Mat2::identity();
    (id.kron(h) - h.transpose().kron(&id)).scale(-I)
}

/// Vectorized dissipator of one channel, `√γL` folded in.
fn dissipator_term(c: &CollapseOperator) -> Mat4 {
    let l = c.scaled_operator();
    let id = Mat2::identity();
    let ldl = l.adjoint() * l;
    l.conj().kron(&l) - id.kron(&ldl).scale_real(0.5) - ldl.transpose().kron(&id).scale_real(0.5)
}

/// Generator of `ρ̇ = −i[H, ρ] + Σ_k (L_k ρ L_k† − ½{L_k†L_k, ρ})`.
pub fn lindblad_generator(h: &HermitianOperator, collapses: &[CollapseOperator]) -> Result<Superoperator> {
    if h.role() == OperatorRole::CollapsePrefactor {
        // Only Hermitian roles may serve as a Hamiltonian.
        let defect = h.matrix().hermiticity_defect();
        if defect > HERMITIAN_TOL {
            return Err(Error::NotHermitian { defect });
        }
    }
    let mut total = commutator_term(h.matrix());
    for c in collapses {
        if !(c.rate() >= 0.0 && c.rate().is_finite()) {
            return Err(Error::NegativeRate { rate: c.rate() });
        }
        total += dissipator_term(c);
    }
    Ok(Superoperator(total))
}

/// `∂L/∂u = −i H_c^×` for a control term `u·H_c`.
pub fn control_generator_term(h_c: &HermitianOperator) -> Superoperator {
    Superoperator(commutator_term(h_c.matrix()))
}

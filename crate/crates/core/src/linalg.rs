//! Fixed-size complex matrices and the matrix exponential.
//!
//! Everything here is stack-allocated: the largest object the crate ever
//! exponentiates is the 8×8 augmented block used for Fréchet derivatives.

use core::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Dense `N×N` complex matrix, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Matrix<const N: usize>(pub [[C64; N]; N]);

pub type Mat2 = Matrix<2>;
pub type Mat4 = Matrix<4>;
pub type Mat8 = Matrix<8>;

impl<const N: usize> Default for Matrix<N> {
    fn default() -> Self {
        Self::zeros()
    }
}

impl<const N: usize> Matrix<N> {
    pub const fn zeros() -> Self {
        Matrix([[ZERO; N]; N])
    }

    pub fn identity() -> Self {
        let mut m = Self::zeros();
        for i in 0..N {
            m.0[i][i] = ONE;
        }
        m
    }

    pub fn from_fn(mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros();
        for i in 0..N {
            for j in 0..N {
                m.0[i][j] = f(i, j);
            }
        }
        m
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::from_fn(|i, j| self.0[i][j] * s)
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self::from_fn(|i, j| self.0[i][j] * s)
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(|i, j| self.0[j][i].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(|i, j| self.0[j][i])
    }

    pub fn conj(&self) -> Self {
        Self::from_fn(|i, j| self.0[i][j].conj())
    }

    pub fn trace(&self) -> C64 {
        (0..N).map(|i| self.0[i][i]).sum()
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> f64 {
        (0..N)
            .map(|j| (0..N).map(|i| self.0[i][j].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flat_map(|row| row.iter())
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.0
            .iter()
            .flat_map(|row| row.iter())
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Largest deviation from Hermiticity, `max |A_ij − conj(A_ji)|`.
    pub fn hermiticity_defect(&self) -> f64 {
        (*self - self.adjoint()).max_abs()
    }

    pub fn mul_vec(&self, v: &[C64; N]) -> [C64; N] {
        let mut out = [ZERO; N];
        for i in 0..N {
            let mut acc = ZERO;
            for j in 0..N {
                acc += self.0[i][j] * v[j];
            }
            out[i] = acc;
        }
        out
    }

    /// `self† v`
    pub fn adjoint_mul_vec(&self, v: &[C64; N]) -> [C64; N] {
        let mut out = [ZERO; N];
        for j in 0..N {
            let mut acc = ZERO;
            for i in 0..N {
                acc += self.0[i][j].conj() * v[i];
            }
            out[j] = acc;
        }
        out
    }

    /// Solves `self · X = rhs` by LU with partial pivoting. `None` when singular.
    pub fn solve(&self, rhs: &Self) -> Option<Self> {
        let mut a = *self;
        let mut b = *rhs;
        for col in 0..N {
            let pivot = (col..N)
                .max_by(|&p, &q| a.0[p][col].norm().total_cmp(&a.0[q][col].norm()))
                .unwrap_or(col);
            if a.0[pivot][col].norm() == 0.0 {
                return None;
            }
            a.0.swap(col, pivot);
            b.0.swap(col, pivot);
            let inv = a.0[col][col].inv();
            for row in col + 1..N {
                let factor = a.0[row][col] * inv;
                if factor == ZERO {
                    continue;
                }
                for k in col..N {
                    let t = a.0[col][k];
                    a.0[row][k] -= factor * t;
                }
                for k in 0..N {
                    let t = b.0[col][k];
                    b.0[row][k] -= factor * t;
                }
            }
        }
        for col in (0..N).rev() {
            let inv = a.0[col][col].inv();
            for k in 0..N {
                let mut acc = b.0[col][k];
                for j in col + 1..N {
                    acc -= a.0[col][j] * b.0[j][k];
                }
                b.0[col][k] = acc * inv;
            }
        }
        Some(b)
    }

    /// `e^{self}` by scaling and squaring with a diagonal Padé approximant.
    pub fn expm(&self) -> Self {
        expm(self)
    }
}

impl Mat2 {
    /// Kronecker product `self ⊗ rhs`; the left factor indexes the outer blocks.
    pub fn kron(&self, rhs: &Mat2) -> Mat4 {
        Mat4::from_fn(|r, c| self.0[r / 2][c / 2] * rhs.0[r % 2][c % 2])
    }
}

impl<const N: usize> Index<(usize, usize)> for Matrix<N> {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.0[i][j]
    }
}

impl<const N: usize> IndexMut<(usize, usize)> for Matrix<N> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.0[i][j]
    }
}

impl<const N: usize> Add for Matrix<N> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl<const N: usize> AddAssign for Matrix<N> {
    fn add_assign(&mut self, rhs: Self) {
        for i in 0..N {
            for j in 0..N {
                self.0[i][j] += rhs.0[i][j];
            }
        }
    }
}

impl<const N: usize> Sub for Matrix<N> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        self -= rhs;
        self
    }
}

impl<const N: usize> SubAssign for Matrix<N> {
    fn sub_assign(&mut self, rhs: Self) {
        for i in 0..N {
            for j in 0..N {
                self.0[i][j] -= rhs.0[i][j];
            }
        }
    }
}

impl<const N: usize> Neg for Matrix<N> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::from_fn(|i, j| -self.0[i][j])
    }
}

impl<const N: usize> Mul for Matrix<N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut out = Self::zeros();
        for i in 0..N {
            for k in 0..N {
                let a = self.0[i][k];
                if a == ZERO {
                    continue;
                }
                for j in 0..N {
                    out.0[i][j] += a * rhs.0[k][j];
                }
            }
        }
        out
    }
}

/// Upper block-triangular matrix `[[A, E], [0, A]]` with both diagonal
/// blocks equal.
///
/// Products, sums and solves of such matrices stay in the same form, so the
/// exponential of the 2N×2N block can be formed from N×N operations only. The
/// top-right block of `exp([[A, E], [0, A]])` is the Fréchet derivative of
/// `exp` at `A` in direction `E`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockPair<const N: usize> {
    pub diag: Matrix<N>,
    pub upper: Matrix<N>,
}

impl<const N: usize> Add for BlockPair<N> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        BlockPair {
            diag: self.diag + rhs.diag,
            upper: self.upper + rhs.upper,
        }
    }
}

impl<const N: usize> Sub for BlockPair<N> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        BlockPair {
            diag: self.diag - rhs.diag,
            upper: self.upper - rhs.upper,
        }
    }
}

impl<const N: usize> Mul for BlockPair<N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        BlockPair {
            diag: self.diag * rhs.diag,
            upper: self.diag * rhs.upper + self.upper * rhs.diag,
        }
    }
}

/// Operations the Padé exponential needs from its operand.
pub(crate) trait ExpAlgebra:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self>
{
    fn identity() -> Self;
    fn scale_real(&self, s: f64) -> Self;
    fn norm1(&self) -> f64;
    /// `self⁻¹ · rhs`
    fn solve(&self, rhs: &Self) -> Option<Self>;
}

impl<const N: usize> ExpAlgebra for Matrix<N> {
    fn identity() -> Self {
        Matrix::identity()
    }
    fn scale_real(&self, s: f64) -> Self {
        Matrix::scale_real(self, s)
    }
    fn norm1(&self) -> f64 {
        Matrix::norm1(self)
    }
    fn solve(&self, rhs: &Self) -> Option<Self> {
        Matrix::solve(self, rhs)
    }
}

impl<const N: usize> ExpAlgebra for BlockPair<N> {
    fn identity() -> Self {
        BlockPair {
            diag: Matrix::identity(),
            upper: Matrix::zeros(),
        }
    }
    fn scale_real(&self, s: f64) -> Self {
        BlockPair {
            diag: self.diag.scale_real(s),
            upper: self.upper.scale_real(s),
        }
    }
    fn norm1(&self) -> f64 {
        // Columns of the left half only see A; columns of the right half see E over A.
        let left = self.diag.norm1();
        let right = (0..N)
            .map(|j| {
                (0..N)
                    .map(|i| self.upper.0[i][j].norm() + self.diag.0[i][j].norm())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max);
        left.max(right)
    }
    fn solve(&self, rhs: &Self) -> Option<Self> {
        let diag = self.diag.solve(&rhs.diag)?;
        let upper = self.diag.solve(&(rhs.upper - self.upper * diag))?;
        Some(BlockPair { diag, upper })
    }
}

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// 1-norm thresholds below which the degree-m approximant is accurate to unit roundoff.
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA13: f64 = 5.371920351148152e0;

fn pade_low<T: ExpAlgebra>(a: &T, b: &[f64]) -> (T, T) {
    let id = T::identity();
    let a2 = *a * *a;
    let mut even = id.scale_real(b[0]);
    let mut odd = id.scale_real(b[1]);
    let mut power = id;
    let mut k = 2;
    while k < b.len() {
        power = power * a2;
        even = even + power.scale_real(b[k]);
        if k + 1 < b.len() {
            odd = odd + power.scale_real(b[k + 1]);
        }
        k += 2;
    }
    (*a * odd, even)
}

fn pade13<T: ExpAlgebra>(a: &T) -> (T, T) {
    let b = &PADE13;
    let id = T::identity();
    let a2 = *a * *a;
    let a4 = a2 * a2;
    let a6 = a4 * a2;
    let u_inner = a6 * (a6.scale_real(b[13]) + a4.scale_real(b[11]) + a2.scale_real(b[9]))
        + a6.scale_real(b[7])
        + a4.scale_real(b[5])
        + a2.scale_real(b[3])
        + id.scale_real(b[1]);
    let u = *a * u_inner;
    let v = a6 * (a6.scale_real(b[12]) + a4.scale_real(b[10]) + a2.scale_real(b[8]))
        + a6.scale_real(b[6])
        + a4.scale_real(b[4])
        + a2.scale_real(b[2])
        + id.scale_real(b[0]);
    (u, v)
}

/// Scaling-and-squaring Padé exponential (degrees 3–13 chosen by the 1-norm).
pub(crate) fn expm<T: ExpAlgebra>(a: &T) -> T {
    let norm = a.norm1();
    for &(degree, theta) in THETA.iter() {
        if norm <= theta {
            let coeffs: &[f64] = match degree {
                3 => &PADE3,
                5 => &PADE5,
                7 => &PADE7,
                _ => &PADE9,
            };
            let (u, v) = pade_low(a, coeffs);
            return finish(u, v);
        }
    }
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scaled = a.scale_real(0.5f64.powi(squarings));
    let (u, v) = pade13(&scaled);
    let mut r = finish(u, v);
    for _ in 0..squarings {
        r = r * r;
    }
    r
}

fn finish<T: ExpAlgebra>(u: T, v: T) -> T {
    // The Padé denominator is well conditioned inside the theta bounds.
    (v - u)
        .solve(&(v + u))
        .expect("Padé denominator is nonsingular for finite input")
}

/// Eigen-decomposition of a 2×2 Hermitian matrix by the closed-form quadratic.
///
/// Returns eigenvalues in ascending order and matching unit eigenvectors with
/// the first nonzero component made real and positive.
pub fn hermitian_eigen2(m: &Mat2) -> ([f64; 2], [[C64; 2]; 2]) {
    let a = m.0[0][0].re;
    let d = m.0[1][1].re;
    let b = (m.0[0][1] + m.0[1][0].conj()) * 0.5;
    let mean = 0.5 * (a + d);
    let half_gap = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
    let values = [mean - half_gap, mean + half_gap];
    if b.norm() <= 1e-300 {
        // Already diagonal; order the basis vectors by their diagonal entry.
        let (low, high) = if a <= d { (0, 1) } else { (1, 0) };
        let mut vecs = [[ZERO; 2]; 2];
        vecs[0][low] = ONE;
        vecs[1][high] = ONE;
        return (values, vecs);
    }
    let vector = |mu: f64| {
        // Two algebraically equivalent null vectors of (m − μ); keep the larger.
        let v1 = [b, C64::new(mu - a, 0.0)];
        let v2 = [C64::new(mu - d, 0.0), b.conj()];
        let n1 = v1[0].norm_sqr() + v1[1].norm_sqr();
        let n2 = v2[0].norm_sqr() + v2[1].norm_sqr();
        let (v, n) = if n1 >= n2 { (v1, n1) } else { (v2, n2) };
        fix_phase([v[0] / n.sqrt(), v[1] / n.sqrt()])
    };
    (values, [vector(values[0]), vector(values[1])])
}

fn fix_phase(v: [C64; 2]) -> [C64; 2] {
    let lead = if v[0].norm() > 1e-14 { v[0] } else { v[1] };
    let phase = lead.conj() / lead.norm();
    [v[0] * phase, v[1] * phase]
}

/// Projector `|v⟩⟨v|`.
pub fn projector(v: &[C64; 2]) -> Mat2 {
    Mat2::from_fn(|i, j| v[i] * v[j].conj())
}

//! Dense complex operator algebra on the joint system-bath Hilbert space.
//!
//! Every operator is a square `2^n x 2^n` matrix where site 0 is the system
//! qubit and sites `1..n` are bath spins. Site 0 is the most significant
//! tensor factor, i.e. `A (x) B` with `A` acting on site 0.

mod linalg;
mod pauli;
mod spin;

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub use linalg::{principal_log, propagator, HermitianEigen, UnitaryEigen};
pub use pauli::{pauli_decompose, PauliTerm};
pub use spin::{embed_spin_op, pi_pulse, rotation, spin_phi, SpinAxis};

pub type C64 = Complex64;

pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// Dense complex square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator(DMatrix<C64>);

impl Operator {
    pub fn zeros(dim: usize) -> Self {
        Operator(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        Operator(DMatrix::identity(dim, dim))
    }

    /// Wraps a matrix, rejecting non-square input.
    pub fn from_matrix(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                left: m.nrows(),
                right: m.ncols(),
            });
        }
        Ok(Operator(m))
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Operator(DMatrix::from_fn(dim, dim, f))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.0[(row, col)]
    }

    pub fn dagger(&self) -> Self {
        Operator(self.0.adjoint())
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, s: f64) -> Self {
        Operator(&self.0 * C64::new(s, 0.0))
    }

    pub fn scale_c(&self, s: C64) -> Self {
        Operator(&self.0 * s)
    }

    pub fn kron(&self, other: &Operator) -> Self {
        Operator(self.0.kronecker(&other.0))
    }

    /// Hilbert-Schmidt inner product `Tr(self^dagger other)`.
    pub fn inner(&self, other: &Operator) -> C64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a.conj() * b).sum()
    }

    /// `u^dagger self u`.
    pub fn conjugate_by(&self, u: &Operator) -> Self {
        Operator(u.0.adjoint() * &self.0 * &u.0)
    }

    /// Max abs element of `A - A^dagger`.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for r in 0..n {
            for c in r..n {
                worst = worst.max((self.0[(r, c)] - self.0[(c, r)].conj()).norm());
            }
        }
        worst
    }

    /// Max abs element of `U^dagger U - I`.
    pub fn unitarity_defect(&self) -> f64 {
        let prod = self.0.adjoint() * &self.0;
        let n = self.dim();
        let mut worst = 0.0f64;
        for r in 0..n {
            for c in 0..n {
                let target = if r == c { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
                worst = worst.max((prod[(r, c)] - target).norm());
            }
        }
        worst
    }

    /// Hermiticity check with the tolerance scaled by the operator magnitude.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol * self.max_abs().max(1.0)
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_defect() <= tol
    }

    /// `(A + A^dagger) / 2`.
    pub fn hermitian_part(&self) -> Self {
        Operator((&self.0 + self.0.adjoint()) * C64::new(0.5, 0.0))
    }

    /// `(A - A^dagger) / 2`.
    pub fn anti_hermitian_part(&self) -> Self {
        Operator((&self.0 - self.0.adjoint()) * C64::new(0.5, 0.0))
    }

    /// Square block `(row, col)` of size `block` (used to peel off the system factor).
    pub fn block(&self, row: usize, col: usize, block: usize) -> Self {
        Operator(self.0.view((row * block, col * block), (block, block)).into_owned())
    }

    fn check_dims(&self, other: &Operator) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(())
    }
}

/// `[A, B] = AB - BA`.
pub fn commutator(a: &Operator, b: &Operator) -> Result<Operator> {
    a.check_dims(b)?;
    Ok(Operator(&a.0 * &b.0 - &b.0 * &a.0))
}

/// Relative Frobenius distance `|a - b| / max(1, |b|)`.
pub fn relative_distance(a: &Operator, b: &Operator) -> f64 {
    (a - b).frobenius_norm() / b.frobenius_norm().max(1.0)
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        Operator(&self.0 + &rhs.0)
    }
}

impl Add for Operator {
    type Output = Operator;
    fn add(self, rhs: Operator) -> Operator {
        Operator(self.0 + rhs.0)
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        Operator(&self.0 - &rhs.0)
    }
}

impl Sub for Operator {
    type Output = Operator;
    fn sub(self, rhs: Operator) -> Operator {
        Operator(self.0 - rhs.0)
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator(&self.0 * &rhs.0)
    }
}

impl Mul for Operator {
    type Output = Operator;
    fn mul(self, rhs: Operator) -> Operator {
        Operator(self.0 * rhs.0)
    }
}

impl Mul<f64> for &Operator {
    type Output = Operator;
    fn mul(self, rhs: f64) -> Operator {
        self.scale(rhs)
    }
}

impl Mul<f64> for Operator {
    type Output = Operator;
    fn mul(self, rhs: f64) -> Operator {
        Operator(self.0 * C64::new(rhs, 0.0))
    }
}

impl Mul<C64> for &Operator {
    type Output = Operator;
    fn mul(self, rhs: C64) -> Operator {
        self.scale_c(rhs)
    }
}

impl Mul<C64> for Operator {
    type Output = Operator;
    fn mul(self, rhs: C64) -> Operator {
        Operator(self.0 * rhs)
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        Operator(-&self.0)
    }
}

impl Neg for Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        Operator(-self.0)
    }
}

impl AddAssign<&Operator> for Operator {
    fn add_assign(&mut self, rhs: &Operator) {
        self.0 += &rhs.0;
    }
}

impl SubAssign<&Operator> for Operator {
    fn sub_assign(&mut self, rhs: &Operator) {
        self.0 -= &rhs.0;
    }
}


#[cfg(test)]
mod tests {
    use super::testutil::random_hermitian;
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn commutator_of_self_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_hermitian(8, &mut rng);
        assert_eq!(commutator(&a, &a).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn commutator_rejects_mismatched_dims() {
        let err = commutator(&Operator::zeros(2), &Operator::zeros(4)).unwrap_err();
        assert_eq!(err, Error::DimensionMismatch { left: 2, right: 4 });
    }

    #[test]
    fn jacobi_identity_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_hermitian(16, &mut rng);
        let b = random_hermitian(16, &mut rng);
        let c = random_hermitian(16, &mut rng);
        let bc = commutator(&b, &c).unwrap();
        let ca = commutator(&c, &a).unwrap();
        let ab = commutator(&a, &b).unwrap();
        let jacobi = commutator(&a, &bc).unwrap() + commutator(&b, &ca).unwrap() + commutator(&c, &ab).unwrap();
        assert!(jacobi.max_abs() < 1e-12, "{}", jacobi.max_abs());
    }

    #[test]
    fn non_square_matrix_rejected() {
        assert!(Operator::from_matrix(DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn block_extracts_tensor_factor() {
        let z = embed_spin_op(0, SpinAxis::Z, 2).unwrap();
        let top = z.block(0, 0, 2);
        assert_eq!(top, Operator::identity(2).scale(0.5));
        assert_eq!(z.block(1, 1, 2), Operator::identity(2).scale(-0.5));
    }
}

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{Operator, C64, I};
use crate::error::{Error, Result};
use crate::tol;

/// Eigendecomposition of a Hermitian operator, reusable for many propagation times.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<C64>,
}

impl HermitianEigen {
    pub fn new(h: &Operator) -> Result<Self> {
        if !h.is_hermitian(tol::HERMITICITY) {
            return Err(Error::invalid(format!(
                "operator is not Hermitian (defect {:e})",
                h.hermiticity_defect()
            )));
        }
        let eig = SymmetricEigen::new(h.hermitian_part().into_matrix());
        Ok(HermitianEigen {
            values: eig.eigenvalues.iter().copied().collect(),
            vectors: eig.eigenvectors,
        })
    }

    /// `exp(-i H t)`.
    pub fn propagator(&self, t: f64) -> Operator {
        let phases = DVector::from_iterator(
            self.values.len(),
            self.values.iter().map(|&l| C64::from_polar(1.0, -l * t)),
        );
        let mut scaled = self.vectors.clone();
        for (mut col, p) in scaled.column_iter_mut().zip(phases.iter()) {
            col *= *p;
        }
        Operator(scaled * self.vectors.adjoint())
    }
}

/// `exp(-i H t)` for Hermitian `H` and `t >= 0`.
pub fn propagator(h: &Operator, t: f64) -> Result<Operator> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::arg(format!("propagation time {t} must be finite and >= 0")));
    }
    Ok(HermitianEigen::new(h)?.propagator(t))
}

/// Spectral decomposition `U = V diag(e^{i phase}) V^dagger` of a unitary.
///
/// Eigenvectors come from the Hermitian Cayley transform of a phase-shifted
/// copy of `U`; the shift keeps `-1` inside the widest gap of the spectrum so
/// the transform stays well conditioned.
#[derive(Clone, Debug)]
pub struct UnitaryEigen {
    /// Eigenphases in `(-pi, pi]`.
    pub phases: Vec<f64>,
    pub vectors: DMatrix<C64>,
}

impl UnitaryEigen {
    pub fn new(u: &Operator) -> Result<Self> {
        if !u.is_unitary(tol::UNITARITY) {
            return Err(Error::invalid(format!(
                "operator is not unitary (defect {:e})",
                u.unitarity_defect()
            )));
        }
        // First pass locates the spectrum; a second pass re-centres the shift if needed.
        let first = cayley_eigen(u, 0.0).or_else(|_| cayley_eigen(u, 1.0))?;
        let (gap_mid, _) = widest_gap(&first.phases);
        let clearance = first.phases.iter().map(|&p| PI - p.abs()).fold(f64::INFINITY, f64::min);
        let eig = if clearance > 0.5 {
            first
        } else {
            cayley_eigen(u, PI - gap_mid)?
        };
        let residual = (&eig.reconstruct() - u).max_abs();
        if residual > 1e-9 {
            return Err(Error::Numerical(format!(
                "unitary eigendecomposition residual {residual:e}"
            )));
        }
        Ok(eig)
    }

    pub fn dim(&self) -> usize {
        self.phases.len()
    }

    /// `V diag(f(phase)) V^dagger`.
    pub fn apply(&self, f: impl Fn(f64) -> C64) -> Operator {
        let mut scaled = self.vectors.clone();
        for (mut col, &p) in scaled.column_iter_mut().zip(self.phases.iter()) {
            col *= f(p);
        }
        Operator(scaled * self.vectors.adjoint())
    }

    pub fn reconstruct(&self) -> Operator {
        self.apply(|p| C64::from_polar(1.0, p))
    }

    /// `V^dagger A V`.
    pub fn to_eigenbasis(&self, a: &Operator) -> DMatrix<C64> {
        self.vectors.adjoint() * a.matrix() * &self.vectors
    }
}

fn cayley_eigen(u: &Operator, shift: f64) -> Result<UnitaryEigen> {
    let n = u.dim();
    let eye = DMatrix::<C64>::identity(n, n);
    let shifted = u.matrix() * C64::from_polar(1.0, shift);
    let inv = (&eye + &shifted)
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("Cayley transform is singular".into()))?;
    let cayley = Operator((&eye - &shifted) * inv * I).hermitian_part();
    let eig = SymmetricEigen::new(cayley.into_matrix());
    let vectors = eig.eigenvectors;
    let rayleigh = vectors.adjoint() * (u.matrix() * &vectors);
    let phases = (0..n).map(|k| rayleigh[(k, k)].arg()).collect();
    Ok(UnitaryEigen { phases, vectors })
}

/// Midpoint and width of the widest empty arc between sorted eigenphases.
fn widest_gap(phases: &[f64]) -> (f64, f64) {
    let mut sorted: Vec<f64> = phases.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    if sorted.is_empty() {
        return (PI, 2.0 * PI);
    }
    let mut best = (
        sorted[0] + 2.0 * PI - sorted[sorted.len() - 1],
        sorted[sorted.len() - 1],
    );
    for w in sorted.windows(2) {
        let width = w[1] - w[0];
        if width > best.0 {
            best = (width, w[0]);
        }
    }
    let mid = best.1 + best.0 / 2.0;
    (mid, best.0)
}

/// Principal matrix logarithm of a unitary: anti-Hermitian `L` with
/// `exp(L) = U` and eigenvalues `i theta`, `theta` in `(-pi, pi)`.
pub fn principal_log(u: &Operator) -> Result<Operator> {
    let eig = UnitaryEigen::new(u)?;
    if let Some(&phase) = eig.phases.iter().find(|p| PI - p.abs() < tol::BRANCH_GUARD) {
        return Err(Error::BranchCut {
            phase,
            guard: tol::BRANCH_GUARD,
        });
    }
    Ok(eig.apply(|p| C64::new(0.0, p)).anti_hermitian_part())
}

//! Numerical tolerances shared by every module.

/// Max abs element of `A - A^dagger` accepted for a Hamiltonian.
pub const HERMITICITY: f64 = 1e-12;

/// Max abs element of `U^dagger U - I` accepted for a propagator.
pub const UNITARITY: f64 = 1e-10;

/// Minimum distance of an eigenphase from -pi before `principal_log` refuses.
pub const BRANCH_GUARD: f64 = 1e-6;

/// Relative Frobenius tolerance used when comparing mirrored toggling segments.
pub const SYMMETRY: f64 = 1e-10;

/// Density-matrix trace tolerance.
pub const TRACE: f64 = 1e-12;

/// Most negative eigenvalue tolerated in a density matrix.
pub const POSITIVITY: f64 = 1e-10;

/// Relative tolerance for matching times (sample offsets, split points).
pub const TIME: f64 = 1e-9;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Operator, C64, I};
use crate::error::{Error, Result};

/// Largest supported register (system + bath).
pub const MAX_SITES: usize = 11;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpinAxis {
    X,
    Y,
    Z,
}

impl SpinAxis {
    pub const ALL: [SpinAxis; 3] = [SpinAxis::X, SpinAxis::Y, SpinAxis::Z];

    /// Half the Pauli matrix for this axis.
    fn half_pauli(self) -> DMatrix<C64> {
        let z = C64::new(0.0, 0.0);
        let h = C64::new(0.5, 0.0);
        match self {
            SpinAxis::X => DMatrix::from_row_slice(2, 2, &[z, h, h, z]),
            SpinAxis::Y => DMatrix::from_row_slice(2, 2, &[z, -I * 0.5, I * 0.5, z]),
            SpinAxis::Z => DMatrix::from_row_slice(2, 2, &[h, z, z, -h]),
        }
    }
}

/// Spin-1/2 operator `S_axis` on `site`, identity elsewhere.
pub fn embed_spin_op(site: usize, axis: SpinAxis, n_sites: usize) -> Result<Operator> {
    if n_sites == 0 || n_sites > MAX_SITES {
        return Err(Error::arg(format!(
            "register of {n_sites} sites is outside 1..={MAX_SITES}"
        )));
    }
    if site >= n_sites {
        return Err(Error::arg(format!("site {site} out of range for {n_sites} sites")));
    }
    let eye = DMatrix::<C64>::identity(2, 2);
    let mut acc = DMatrix::<C64>::identity(1, 1);
    for s in 0..n_sites {
        let factor = if s == site { axis.half_pauli() } else { eye.clone() };
        acc = acc.kronecker(&factor);
    }
    Ok(Operator(acc))
}

/// `cos(phi) S_x + sin(phi) S_y` on the system qubit.
pub fn spin_phi(phase: f64, n_sites: usize) -> Result<Operator> {
    let sx = embed_spin_op(0, SpinAxis::X, n_sites)?;
    let sy = embed_spin_op(0, SpinAxis::Y, n_sites)?;
    Ok(sx.scale(phase.cos()) + sy.scale(phase.sin()))
}

/// `exp(-i angle S_phi)` on the system qubit, evaluated in closed form
/// using `(2 S_phi)^2 = 1`.
pub fn rotation(phase: f64, angle: f64, n_sites: usize) -> Result<Operator> {
    let s = spin_phi(phase, n_sites)?;
    let dim = s.dim();
    let half = angle / 2.0;
    Ok(Operator::identity(dim).scale(half.cos()) + s.scale_c(-I * (2.0 * half.sin())))
}

/// Ideal pi pulse `exp(-i pi S_phi) = -2i S_phi`.
pub fn pi_pulse(phase: f64, n_sites: usize) -> Result<Operator> {
    Ok(spin_phi(phase, n_sites)?.scale_c(-I * 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opcore::commutator;

    #[test]
    fn single_spin_sz_is_diagonal_half() {
        let sz = embed_spin_op(0, SpinAxis::Z, 1).unwrap();
        let expect = Operator::from_fn(2, |r, c| match (r, c) {
            (0, 0) => C64::new(0.5, 0.0),
            (1, 1) => C64::new(-0.5, 0.0),
            _ => C64::new(0.0, 0.0),
        });
        assert_eq!(sz, expect);
    }

    #[test]
    fn bath_sx_only_flips_bath_bit() {
        let op = embed_spin_op(1, SpinAxis::X, 2).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                let v = op.get(r, c);
                if r ^ c == 1 {
                    assert_eq!(v, C64::new(0.5, 0.0));
                } else {
                    assert_eq!(v, C64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn su2_algebra() {
        let sx = embed_spin_op(0, SpinAxis::X, 1).unwrap();
        let sy = embed_spin_op(0, SpinAxis::Y, 1).unwrap();
        let sz = embed_spin_op(0, SpinAxis::Z, 1).unwrap();
        let c = commutator(&sx, &sy).unwrap();
        assert!((&c - &sz.scale_c(I)).max_abs() < 1e-15);
    }

    #[test]
    fn distinct_sites_commute_exhaustively() {
        for k in 0..=3usize {
            let n = k + 1;
            for j in 0..n {
                for l in 0..n {
                    if j == l {
                        continue;
                    }
                    for a in SpinAxis::ALL {
                        for b in SpinAxis::ALL {
                            let x = embed_spin_op(j, a, n).unwrap();
                            let y = embed_spin_op(l, b, n).unwrap();
                            assert_eq!(commutator(&x, &y).unwrap().max_abs(), 0.0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn site_out_of_range() {
        assert!(matches!(embed_spin_op(2, SpinAxis::X, 2), Err(Error::Argument(_))));
        assert!(embed_spin_op(0, SpinAxis::X, 12).is_err());
    }

    #[test]
    fn rotation_by_pi_matches_ideal_pulse() {
        let a = rotation(0.3, std::f64::consts::PI, 2).unwrap();
        let b = pi_pulse(0.3, 2).unwrap();
        assert!((&a - &b).max_abs() < 1e-15);
        assert!(a.is_unitary(1e-14));
    }
}

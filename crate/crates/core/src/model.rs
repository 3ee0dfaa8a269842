//! System-bath Hamiltonian `H = H_S + H_SE + H_E` for one qubit and `K` bath spins.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::opcore::{embed_spin_op, Operator, SpinAxis, C64};

pub const MAX_BATH: usize = 10;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BathModel {
    #[default]
    None,
    /// `sum d_jk (2 Iz Iz - Ix Ix - Iy Iy)`
    SecularDipolar,
    /// `sum d_jk Iz Iz`
    Diagonal,
}

/// Everything needed to build the Hamiltonian. Couplings are in rad/us.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    pub n_bath: usize,
    #[serde(default)]
    pub omega_s: f64,
    #[serde(default)]
    pub b: Vec<f64>,
    #[serde(default)]
    pub bath_model: BathModel,
    /// Pair couplings for `j < k` in lexicographic order `(0,1), (0,2), ..., (1,2), ...`
    /// (bath indices, zero-based).
    #[serde(default)]
    pub d: Vec<f64>,
    /// Relative flip-angle error.
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub seed: u64,
}

impl HamiltonianSpec {
    /// Spec with couplings drawn by [`sample_couplings`].
    pub fn sampled(
        n_bath: usize,
        scale_b: f64,
        scale_d: f64,
        bath_model: BathModel,
        epsilon: f64,
        seed: u64,
    ) -> Result<Self> {
        let (b, d) = sample_couplings(n_bath, scale_b, scale_d, seed)?;
        let d = if bath_model == BathModel::None { Vec::new() } else { d };
        Ok(HamiltonianSpec {
            n_bath,
            omega_s: 0.0,
            b,
            bath_model,
            d,
            epsilon,
            seed,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_bath + 1
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.n_bath;
        if k > MAX_BATH {
            return Err(Error::invalid(format!(
                "{k} bath spins exceeds the limit of {MAX_BATH}"
            )));
        }
        if self.b.len() != k {
            return Err(Error::invalid(format!(
                "expected {k} system-bath couplings, got {}",
                self.b.len()
            )));
        }
        let pairs = k * k.saturating_sub(1) / 2;
        let d_ok = match self.bath_model {
            BathModel::None => self.d.is_empty() || self.d.len() == pairs,
            _ => self.d.len() == pairs,
        };
        if !d_ok {
            return Err(Error::invalid(format!(
                "expected {pairs} bath pair couplings, got {}",
                self.d.len()
            )));
        }
        let finite = self.omega_s.is_finite()
            && self.epsilon.is_finite()
            && self.b.iter().chain(self.d.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("couplings must be finite"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct HamiltonianParts {
    pub h_s: Operator,
    pub h_se: Operator,
    pub h_e: Operator,
    pub h_total: Operator,
    pub n_bath: usize,
}

impl HamiltonianParts {
    /// Assembles parts from explicit operators; `h_total` is their sum.
    pub fn from_parts(h_s: Operator, h_se: Operator, h_e: Operator, n_bath: usize) -> Result<Self> {
        let dim = 1usize << (n_bath + 1);
        for op in [&h_s, &h_se, &h_e] {
            if op.dim() != dim {
                return Err(Error::DimensionMismatch {
                    left: op.dim(),
                    right: dim,
                });
            }
            if !op.is_hermitian(crate::tol::HERMITICITY) {
                return Err(Error::invalid("Hamiltonian part is not Hermitian"));
            }
        }
        let h_total = &(&h_s + &h_se) + &h_e;
        Ok(HamiltonianParts {
            h_s,
            h_se,
            h_e,
            h_total,
            n_bath,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_bath + 1
    }

    pub fn dim(&self) -> usize {
        self.h_total.dim()
    }
}

pub fn build_hamiltonian(spec: &HamiltonianSpec) -> Result<HamiltonianParts> {
    spec.validate()?;
    let n = spec.n_sites();
    let dim = 1usize << n;
    let bit = |site: usize| 1usize << (n - 1 - site);
    // +1/2 for spin up (bit clear), -1/2 for spin down
    let sz = |s: usize, site: usize| if s & bit(site) == 0 { 0.5 } else { -0.5 };

    let h_s = embed_spin_op(0, SpinAxis::Z, n)?.scale(spec.omega_s);

    let mut se = DMatrix::<C64>::zeros(dim, dim);
    for s in 0..dim {
        let v: f64 = spec
            .b
            .iter()
            .enumerate()
            .map(|(k, bk)| bk * sz(s, 0) * sz(s, k + 1))
            .sum();
        se[(s, s)] = C64::new(v, 0.0);
    }

    let mut he = DMatrix::<C64>::zeros(dim, dim);
    if spec.bath_model != BathModel::None && !spec.d.is_empty() {
        for (pair, (j, k)) in bath_pairs(spec.n_bath).enumerate() {
            let djk = spec.d[pair];
            let (sj, sk) = (j + 1, k + 1);
            let zz = match spec.bath_model {
                BathModel::SecularDipolar => 2.0,
                _ => 1.0,
            };
            for s in 0..dim {
                he[(s, s)] += C64::new(djk * zz * sz(s, sj) * sz(s, sk), 0.0);
                if spec.bath_model == BathModel::SecularDipolar {
                    let flips = (s & bit(sj) != 0) != (s & bit(sk) != 0);
                    if flips {
                        // Ix Ix + Iy Iy = (I+ I- + I- I+) / 2
                        let t = s ^ bit(sj) ^ bit(sk);
                        he[(t, s)] -= C64::new(0.5 * djk, 0.0);
                    }
                }
            }
        }
    }

    HamiltonianParts::from_parts(h_s, Operator::from_matrix(se)?, Operator::from_matrix(he)?, spec.n_bath)
}

/// Bath index pairs `(j, k)`, `j < k`, in the order used for the `d` list.
pub fn bath_pairs(n_bath: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n_bath).flat_map(move |j| (j + 1..n_bath).map(move |k| (j, k)))
}

/// Draws `b_k ~ N(0, scale_b^2)` then `d_jk ~ N(0, scale_d^2)` from a ChaCha8 stream.
pub fn sample_couplings(n_bath: usize, scale_b: f64, scale_d: f64, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(scale_b > 0.0 && scale_b.is_finite()) || !(scale_d > 0.0 && scale_d.is_finite()) {
        return Err(Error::arg("coupling scales must be positive and finite"));
    }
    if n_bath > MAX_BATH {
        return Err(Error::arg(format!(
            "{n_bath} bath spins exceeds the limit of {MAX_BATH}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nb = Normal::new(0.0, scale_b).map_err(|e| Error::arg(e.to_string()))?;
    let nd = Normal::new(0.0, scale_d).map_err(|e| Error::arg(e.to_string()))?;
    let b = (0..n_bath).map(|_| nb.sample(&mut rng)).collect();
    let d = bath_pairs(n_bath).map(|_| nd.sample(&mut rng)).collect();
    Ok((b, d))
}

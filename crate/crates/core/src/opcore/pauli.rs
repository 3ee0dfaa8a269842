use serde::{Deserialize, Serialize};

use super::{Operator, C64};
use crate::error::{Error, Result};

/// One term `coefficient * P` of a Pauli-string expansion. The label lists one
/// of `I X Y Z` per site, site 0 first; `P` is the tensor product of Pauli
/// matrices (not spin operators).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliTerm {
    pub label: String,
    pub coefficient: f64,
}

/// Expands a Hermitian operator as `sum_P c_P P` with `c_P = Tr(P A) / 2^n`.
///
/// Terms with `|c_P| <= cutoff` are dropped. Output is sorted by label with
/// `I < X < Y < Z`.
pub fn pauli_decompose(op: &Operator, n_sites: usize, cutoff: f64) -> Result<Vec<PauliTerm>> {
    let dim = 1usize << n_sites;
    if op.dim() != dim {
        return Err(Error::DimensionMismatch {
            left: op.dim(),
            right: dim,
        });
    }
    let m = op.matrix();
    let mut terms = Vec::new();
    let mut buf = vec![C64::new(0.0, 0.0); dim];
    for x in 0..dim {
        // Tr(X^x Z^z A) = sum_s (-1)^{z.s} A[s, s ^ x]
        for (s, v) in buf.iter_mut().enumerate() {
            *v = m[(s, s ^ x)];
        }
        walsh_hadamard(&mut buf);
        for (z, &tr) in buf.iter().enumerate() {
            // Y = i X Z
            let ys = (x & z).count_ones();
            let phase = match ys % 4 {
                0 => C64::new(1.0, 0.0),
                1 => C64::new(0.0, 1.0),
                2 => C64::new(-1.0, 0.0),
                _ => C64::new(0.0, -1.0),
            };
            let c = (phase * tr).re / dim as f64;
            if c.abs() > cutoff {
                terms.push(PauliTerm {
                    label: label(x, z, n_sites),
                    coefficient: c,
                });
            }
        }
    }
    terms.sort_by(|a, b| a.label.cmp(&b.label));
    Ok(terms)
}

fn walsh_hadamard(v: &mut [C64]) {
    let n = v.len();
    let mut h = 1;
    while h < n {
        for i in (0..n).step_by(2 * h) {
            for j in i..i + h {
                let (a, b) = (v[j], v[j + h]);
                v[j] = a + b;
                v[j + h] = a - b;
            }
        }
        h *= 2;
    }
}

fn label(x: usize, z: usize, n_sites: usize) -> String {
    (0..n_sites)
        .map(|site| {
            let bit = 1 << (n_sites - 1 - site);
            match (x & bit != 0, z & bit != 0) {
                (false, false) => 'I',
                (true, false) => 'X',
                (true, true) => 'Y',
                (false, true) => 'Z',
            }
        })
        .collect()
}

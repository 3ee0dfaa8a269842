//! Average-Hamiltonian theory: toggling frame, graded BCH recursion and the
//! closed-form results for XY-4 and XY-8.

mod reference;

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::HamiltonianParts;
use crate::opcore::{commutator, pauli_decompose, pi_pulse, relative_distance, spin_phi, Operator, I};
use crate::seq::{PulseSequence, SequenceElement};
use crate::tol;

pub use reference::{closed_form_reference, ClosedForm};

/// Where the flip-angle error of each pulse enters the toggling frame.
///
/// `Impulsive` keeps it as one zero-duration kick per pulse, which is exact.
/// `Absorbed` spreads each error half into the adjacent free-evolution window,
/// dropping the commutators between error and window Hamiltonian inside that window.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorPlacement {
    #[default]
    Impulsive,
    Absorbed,
}

/// Piece of the toggling-frame evolution, stored as the exponent weight
/// `H~ * duration` so that zero-duration kicks are representable.
#[derive(Clone, Debug)]
pub struct TogglingSegment {
    pub weight: Operator,
    pub duration: f64,
}

impl TogglingSegment {
    pub fn hamiltonian(&self, index: usize) -> Result<Operator> {
        if self.duration <= 0.0 {
            return Err(Error::DegenerateWindow { index });
        }
        Ok(self.weight.scale(1.0 / self.duration))
    }

    /// `exp(-i weight)`.
    pub fn propagator(&self) -> Result<Operator> {
        crate::opcore::propagator(&self.weight, 1.0)
    }
}

/// `R = exp(-i pre) * ideal * exp(-i post)`.
#[derive(Clone, Debug)]
pub struct PulseDecomposition {
    pub pre: Operator,
    pub ideal: Operator,
    pub post: Operator,
}

/// Splits an imperfect pulse `exp(-i (1+eps) pi S_phi)` into the ideal pi
/// rotation sandwiched between two error evolutions of weight `eps pi / 2 S_phi`.
/// The weights do not depend on the pulse width `t_p`.
pub fn error_decompose(pulse: &SequenceElement, epsilon: f64, t_p: f64, n_sites: usize) -> Result<PulseDecomposition> {
    let phase = match *pulse {
        SequenceElement::Pulse { phase } => phase,
        SequenceElement::Delay(_) => return Err(Error::arg("error_decompose needs a pulse")),
    };
    if !(t_p > 0.0 && t_p.is_finite()) {
        return Err(Error::arg("pulse width must be positive"));
    }
    let h_phi = spin_phi(phase, n_sites)?.scale(epsilon * PI / t_p);
    let half = h_phi.scale(t_p / 2.0);
    Ok(PulseDecomposition {
        pre: half.clone(),
        ideal: pi_pulse(phase, n_sites)?,
        post: half,
    })
}

enum Event {
    Window { duration: f64, frame: Operator },
    Pulse { kick: Operator },
}

/// Ideal-pulse frame after the whole sequence: the product of all ideal pulses.
pub fn ideal_frame(s: &PulseSequence, n_sites: usize) -> Result<Operator> {
    let mut f = Operator::identity(1 << n_sites);
    for e in s.elements() {
        if let SequenceElement::Pulse { phase } = *e {
            f = &pi_pulse(phase, n_sites)? * &f;
        }
    }
    Ok(f)
}

fn events(s: &PulseSequence, n_sites: usize) -> Result<Vec<Event>> {
    let dim = 1usize << n_sites;
    let mut frame = Operator::identity(dim);
    let mut acc = 0.0;
    let mut out = Vec::new();
    for e in s.elements() {
        match *e {
            SequenceElement::Delay(d) => acc += d,
            SequenceElement::Pulse { phase } => {
                out.push(Event::Window {
                    duration: acc,
                    frame: frame.clone(),
                });
                acc = 0.0;
                out.push(Event::Pulse {
                    kick: spin_phi(phase, n_sites)?.conjugate_by(&frame),
                });
                frame = &pi_pulse(phase, n_sites)? * &frame;
            }
        }
    }
    out.push(Event::Window { duration: acc, frame });
    Ok(out)
}

pub fn toggling_frame(s: &PulseSequence, parts: &HamiltonianParts, epsilon: f64) -> Result<Vec<TogglingSegment>> {
    toggling_frame_with(s, parts, epsilon, ErrorPlacement::default())
}

/// Toggling-frame segments in time order. With `Impulsive` placement,
/// `ideal_frame(s) * prod_k exp(-i W_k)` (latest on the left) is the exact
/// cycle propagator.
pub fn toggling_frame_with(
    s: &PulseSequence,
    parts: &HamiltonianParts,
    epsilon: f64,
    placement: ErrorPlacement,
) -> Result<Vec<TogglingSegment>> {
    if s.is_empty() {
        return Err(Error::arg("sequence is empty"));
    }
    if !epsilon.is_finite() {
        return Err(Error::arg("epsilon must be finite"));
    }
    let ev = events(s, parts.n_sites())?;
    let h = &parts.h_total;
    let mut out = Vec::new();
    match placement {
        ErrorPlacement::Impulsive => {
            for e in &ev {
                match e {
                    Event::Window { duration, frame } if *duration > 0.0 => out.push(TogglingSegment {
                        weight: h.conjugate_by(frame).scale(*duration),
                        duration: *duration,
                    }),
                    Event::Pulse { kick } if epsilon != 0.0 => out.push(TogglingSegment {
                        weight: kick.scale(epsilon * PI),
                        duration: 0.0,
                    }),
                    _ => {}
                }
            }
        }
        ErrorPlacement::Absorbed => {
            // windows sit at even indices, pulses at odd ones
            let half = epsilon * PI / 2.0;
            for (i, e) in ev.iter().enumerate() {
                let Event::Window { duration, frame } = e else {
                    continue;
                };
                let mut weight = h.conjugate_by(frame).scale(*duration);
                let mut flanks = 0;
                for j in [i.checked_sub(1), Some(i + 1)].into_iter().flatten() {
                    if let Some(Event::Pulse { kick }) = ev.get(j) {
                        flanks += 1;
                        if epsilon != 0.0 {
                            weight += &kick.scale(half);
                        }
                    }
                }
                if *duration > 0.0 {
                    out.push(TogglingSegment {
                        weight,
                        duration: *duration,
                    });
                } else if epsilon != 0.0 && flanks == 2 {
                    return Err(Error::DegenerateWindow { index: i / 2 });
                } else if epsilon != 0.0 && flanks == 1 {
                    out.push(TogglingSegment { weight, duration: 0.0 });
                }
            }
        }
    }
    Ok(out)
}

/// `log(e^A e^B)` truncated at total degree `order` in `(A, B)`, `order <= 3`.
pub fn bch_truncated(a: &Operator, b: &Operator, order: usize) -> Result<Operator> {
    if order == 0 || order > 3 {
        return Err(Error::UnsupportedOrder(order));
    }
    let mut z = a + b;
    if order >= 2 {
        let ab = commutator(a, b)?;
        z += &ab.scale(0.5);
        if order == 3 {
            let t = commutator(a, &ab)? - commutator(b, &ab)?;
            z += &t.scale(1.0 / 12.0);
        }
    }
    Ok(z)
}

/// Exponent `Z = Z_1 + Z_2 + ...` with `Z_g` homogeneous of degree `g` in the
/// segment exponents, kept up to `max_grade`.
#[derive(Clone, Debug)]
pub struct GradedExponent {
    grades: Vec<Operator>,
}

impl GradedExponent {
    pub fn new(dim: usize, max_grade: usize) -> Result<Self> {
        if max_grade == 0 || max_grade > 3 {
            return Err(Error::UnsupportedOrder(max_grade));
        }
        Ok(GradedExponent {
            grades: vec![Operator::zeros(dim); max_grade],
        })
    }

    pub fn grade(&self, g: usize) -> &Operator {
        &self.grades[g - 1]
    }

    /// `Z <- log(e^X e^Z)` for a later factor `X` of grade 1.
    pub fn push_later(&mut self, x: &Operator) -> Result<()> {
        let n = self.grades.len();
        if n >= 3 {
            let z1 = &self.grades[0];
            let x_z1 = commutator(x, z1)?;
            let t = commutator(x, &x_z1)? - commutator(z1, &x_z1)?;
            let x_z2 = commutator(x, &self.grades[1])?;
            let upd = x_z2.scale(0.5) + t.scale(1.0 / 12.0);
            self.grades[2] += &upd;
        }
        if n >= 2 {
            let upd = commutator(x, &self.grades[0])?.scale(0.5);
            self.grades[1] += &upd;
        }
        self.grades[0] += x;
        Ok(())
    }
}

/// Graded average Hamiltonian `[H0, H1, ...]` of one cycle.
#[derive(Clone, Debug)]
pub struct AverageHamiltonian {
    pub terms: Vec<Operator>,
    pub cycle_time: f64,
    pub truncation_order: usize,
}

impl AverageHamiltonian {
    pub fn term(&self, n: usize) -> Option<&Operator> {
        self.terms.get(n)
    }

    pub fn total(&self) -> Operator {
        let mut acc = Operator::zeros(self.terms[0].dim());
        for t in &self.terms {
            acc += t;
        }
        acc
    }

    /// Plain-text Pauli-string expansion of every term.
    pub fn report(&self, n_sites: usize, cutoff: f64) -> Result<String> {
        let mut out = String::new();
        let _ = writeln!(out, "# average Hamiltonian, cycle time {}", self.cycle_time);
        let _ = writeln!(out, "# label: site 0 (system) first; operators are Pauli products");
        for (n, t) in self.terms.iter().enumerate() {
            let terms = pauli_decompose(t, n_sites, cutoff)?;
            let _ = writeln!(
                out,
                "H{n}: {} terms, |H{n}|_F = {:.6e}",
                terms.len(),
                t.frobenius_norm()
            );
            for p in terms {
                let _ = writeln!(out, "  {} {:+.12e}", p.label, p.coefficient);
            }
        }
        Ok(out)
    }
}

pub fn average_hamiltonian(
    s: &PulseSequence,
    parts: &HamiltonianParts,
    epsilon: f64,
    max_order: usize,
) -> Result<AverageHamiltonian> {
    average_hamiltonian_with(s, parts, epsilon, max_order, ErrorPlacement::default())
}

/// Folds the toggling segments in time order with grade-tracked BCH and
/// returns `H_n = i Z_{n+1} / tau_c` for `n <= max_order`.
pub fn average_hamiltonian_with(
    s: &PulseSequence,
    parts: &HamiltonianParts,
    epsilon: f64,
    max_order: usize,
    placement: ErrorPlacement,
) -> Result<AverageHamiltonian> {
    if max_order > 2 {
        return Err(Error::UnsupportedOrder(max_order));
    }
    let tc = s.cycle_time();
    if tc <= 0.0 {
        return Err(Error::arg("cycle time must be positive"));
    }
    let segs = toggling_frame_with(s, parts, epsilon, placement)?;
    let mut z = GradedExponent::new(parts.dim(), max_order + 1)?;
    for seg in &segs {
        z.push_later(&seg.weight.scale_c(-I))?;
    }
    let terms = (1..=max_order + 1)
        .map(|g| z.grade(g).scale_c(I * (1.0 / tc)).hermitian_part())
        .collect();
    Ok(AverageHamiltonian {
        terms,
        cycle_time: tc,
        truncation_order: max_order,
    })
}

/// Exact effective Hamiltonian `(i / tau_c) log(F^dagger U)` of one cycle,
/// where `F` is the ideal-pulse frame.
pub fn exact_average_hamiltonian(s: &PulseSequence, parts: &HamiltonianParts, epsilon: f64) -> Result<Operator> {
    let u = crate::sim::cycle_propagator(s, parts, epsilon)?;
    let f = ideal_frame(s, parts.n_sites())?;
    let l = crate::opcore::principal_log(&(&f.dagger() * &u))?;
    Ok(l.scale_c(I * (1.0 / s.cycle_time())).hermitian_part())
}

enum Piece {
    Timed { h: Operator, duration: f64 },
    Kick(Operator),
}

fn normalized_pieces(segs: &[TogglingSegment]) -> Vec<Piece> {
    let mut out: Vec<Piece> = Vec::new();
    for seg in segs {
        if seg.duration > 0.0 {
            let h = seg.weight.scale(1.0 / seg.duration);
            if let Some(Piece::Timed { h: prev, duration }) = out.last_mut() {
                if relative_distance(&h, prev) <= tol::SYMMETRY {
                    *duration += seg.duration;
                    continue;
                }
            }
            out.push(Piece::Timed {
                h,
                duration: seg.duration,
            });
        } else {
            if seg.weight.max_abs() <= 1e-15 {
                continue;
            }
            if let Some(Piece::Kick(prev)) = out.last_mut() {
                *prev += &seg.weight;
                continue;
            }
            out.push(Piece::Kick(seg.weight.clone()));
        }
    }
    out.retain(|p| !matches!(p, Piece::Kick(w) if w.max_abs() <= 1e-15));
    out
}

/// True iff the piecewise toggling Hamiltonian satisfies `H~(t) = H~(tau_c - t)`.
pub fn toggling_time_symmetric(s: &PulseSequence, parts: &HamiltonianParts, epsilon: f64) -> Result<bool> {
    toggling_time_symmetric_with(s, parts, epsilon, ErrorPlacement::default())
}

pub fn toggling_time_symmetric_with(
    s: &PulseSequence,
    parts: &HamiltonianParts,
    epsilon: f64,
    placement: ErrorPlacement,
) -> Result<bool> {
    let segs = toggling_frame_with(s, parts, epsilon, placement)?;
    let pieces = normalized_pieces(&segs);
    let tc = s.cycle_time().max(1.0);
    let n = pieces.len();
    for i in 0..n / 2 + 1 {
        if i >= n {
            break;
        }
        let same = match (&pieces[i], &pieces[n - 1 - i]) {
            (Piece::Timed { h: a, duration: da }, Piece::Timed { h: b, duration: db }) => {
                (da - db).abs() <= tol::TIME * tc && relative_distance(a, b) <= tol::SYMMETRY
            }
            (Piece::Kick(a), Piece::Kick(b)) => relative_distance(a, b) <= tol::SYMMETRY,
            _ => false,
        };
        if !same {
            return Ok(false);
        }
    }
    Ok(true)
}

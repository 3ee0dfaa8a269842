//! Pulse sequences: CPMG, XY-n and CDD builders, time reversal, phase inversion
//! and a small text format.

mod dsl;

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tol;

pub use dsl::{format_sequence, parse_sequence};

pub const PHASE_X: f64 = 0.0;
pub const PHASE_Y: f64 = FRAC_PI_2;
pub const PHASE_MINUS_X: f64 = PI;
pub const PHASE_MINUS_Y: f64 = 3.0 * FRAC_PI_2;

/// A free-evolution delay (us) or an instantaneous nominal pi pulse about the
/// in-plane axis at `phase` radians from x.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SequenceElement {
    Delay(f64),
    Pulse { phase: f64 },
}

impl SequenceElement {
    pub fn pulse(phase: f64) -> Self {
        SequenceElement::Pulse {
            phase: normalize_phase(phase),
        }
    }

    pub fn is_pulse(&self) -> bool {
        matches!(self, SequenceElement::Pulse { .. })
    }

    pub fn duration(&self) -> f64 {
        match *self {
            SequenceElement::Delay(d) => d,
            SequenceElement::Pulse { .. } => 0.0,
        }
    }
}

/// Maps a phase into `[0, 2pi)` and snaps values within 1e-12 of a quarter turn
/// onto the exact constant.
pub fn normalize_phase(phase: f64) -> f64 {
    let p = phase.rem_euclid(TAU);
    let quarter = (p / FRAC_PI_2).round();
    if (p - quarter * FRAC_PI_2).abs() < 1e-12 {
        match quarter as i64 {
            1 => PHASE_Y,
            2 => PHASE_MINUS_X,
            3 => PHASE_MINUS_Y,
            _ => PHASE_X,
        }
    } else {
        p
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    elements: Vec<SequenceElement>,
    label: String,
}

impl PulseSequence {
    pub fn new(elements: Vec<SequenceElement>, label: impl Into<String>) -> Result<Self> {
        let mut out = Vec::with_capacity(elements.len());
        for e in elements {
            match e {
                SequenceElement::Delay(d) => {
                    if !d.is_finite() || d < 0.0 {
                        return Err(Error::invalid(format!("delay {d} must be finite and >= 0")));
                    }
                    out.push(e);
                }
                SequenceElement::Pulse { phase } => {
                    if !phase.is_finite() {
                        return Err(Error::invalid("pulse phase must be finite"));
                    }
                    out.push(SequenceElement::pulse(phase));
                }
            }
        }
        Ok(PulseSequence {
            elements: out,
            label: label.into(),
        })
    }

    pub fn elements(&self) -> &[SequenceElement] {
        &self.elements
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Sum of delays, accumulated in sorted order so that reordering the
    /// elements cannot change the result.
    pub fn cycle_time(&self) -> f64 {
        let mut d: Vec<f64> = self.elements.iter().map(|e| e.duration()).collect();
        d.sort_by(f64::total_cmp);
        d.into_iter().sum()
    }

    pub fn pulse_count(&self) -> usize {
        self.elements.iter().filter(|e| e.is_pulse()).count()
    }

    pub fn phases(&self) -> Vec<f64> {
        self.elements
            .iter()
            .filter_map(|e| match *e {
                SequenceElement::Pulse { phase } => Some(phase),
                _ => None,
            })
            .collect()
    }

    pub fn delays(&self) -> Vec<f64> {
        self.elements
            .iter()
            .filter_map(|e| match *e {
                SequenceElement::Delay(d) => Some(d),
                _ => None,
            })
            .collect()
    }

    /// Times at which pulses fire, measured from the cycle start.
    pub fn pulse_times(&self) -> Vec<f64> {
        let mut t = 0.0;
        let mut out = Vec::new();
        for e in &self.elements {
            match e {
                SequenceElement::Delay(d) => t += d,
                SequenceElement::Pulse { .. } => out.push(t),
            }
        }
        out
    }

    /// Same timing with adjacent delays merged and zero delays removed.
    pub fn merged(&self) -> PulseSequence {
        let mut out: Vec<SequenceElement> = Vec::with_capacity(self.elements.len());
        for e in &self.elements {
            match (*e, out.last_mut()) {
                (SequenceElement::Delay(0.0), _) => {}
                (SequenceElement::Delay(d), Some(SequenceElement::Delay(prev))) => *prev += d,
                (e, _) => out.push(e),
            }
        }
        PulseSequence {
            elements: out,
            label: self.label.clone(),
        }
    }

    pub fn concat(&self, other: &PulseSequence) -> PulseSequence {
        let mut elements = self.elements.clone();
        elements.extend_from_slice(&other.elements);
        PulseSequence {
            elements,
            label: self.label.clone(),
        }
    }

    pub fn repeat(&self, n: usize) -> PulseSequence {
        PulseSequence {
            elements: self.elements.repeat(n),
            label: self.label.clone(),
        }
    }

    /// Elements covering `[0, tau_c/2)`; a delay straddling the midpoint is cut.
    pub fn first_half(&self) -> Result<PulseSequence> {
        let split = self.cycle_time() / 2.0;
        let eps = tol::TIME * self.cycle_time().max(1.0);
        let mut t = 0.0;
        let mut out = Vec::new();
        for e in &self.elements {
            let at_split = (t - split).abs() <= eps;
            match *e {
                SequenceElement::Pulse { .. } if at_split => {
                    return Err(Error::arg(format!(
                        "{}: a pulse sits at the half-cycle split",
                        self.label
                    )));
                }
                SequenceElement::Pulse { .. } => out.push(*e),
                SequenceElement::Delay(d) if at_split && d > eps => break,
                SequenceElement::Delay(_) if at_split => {}
                SequenceElement::Delay(d) if t + d <= split + eps => {
                    out.push(*e);
                    t += d;
                }
                SequenceElement::Delay(_) => {
                    out.push(SequenceElement::Delay(split - t));
                    break;
                }
            }
        }
        Ok(PulseSequence {
            elements: out,
            label: format!("half {}", self.label),
        })
    }
}

impl fmt::Display for PulseSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", format_sequence(self))
    }
}

/// Reverses the element order; delays and phases are unchanged.
pub fn time_reverse(s: &PulseSequence) -> PulseSequence {
    let mut elements = s.elements.clone();
    elements.reverse();
    PulseSequence {
        elements,
        label: format!("{}^T", s.label),
    }
}

/// Shifts every pulse phase by pi.
pub fn phase_invert(s: &PulseSequence) -> PulseSequence {
    let elements = s
        .elements
        .iter()
        .map(|e| match *e {
            SequenceElement::Pulse { phase } => SequenceElement::pulse(phase + PI),
            d => d,
        })
        .collect();
    PulseSequence {
        elements,
        label: format!("inv {}", s.label),
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::arg(format!("tau must be positive and finite, got {tau}")));
    }
    Ok(())
}

fn variant(symmetric: bool) -> &'static str {
    if symmetric {
        "S"
    } else {
        "A"
    }
}

/// `n_pulses` identical pulses. Symmetric timing is `tau/2 P tau P ... P tau/2`,
/// asymmetric is `[tau P]^n`.
pub fn build_cpmg(n_pulses: usize, tau: f64, symmetric: bool, pulse_phase: f64) -> Result<PulseSequence> {
    check_tau(tau)?;
    if n_pulses == 0 {
        return Err(Error::arg("CPMG needs at least one pulse"));
    }
    if !pulse_phase.is_finite() {
        return Err(Error::arg("pulse phase must be finite"));
    }
    let p = SequenceElement::pulse(pulse_phase);
    let mut e = Vec::with_capacity(2 * n_pulses + 1);
    if symmetric {
        e.push(SequenceElement::Delay(tau / 2.0));
        for i in 0..n_pulses {
            e.push(p);
            e.push(SequenceElement::Delay(if i + 1 == n_pulses { tau / 2.0 } else { tau }));
        }
    } else {
        for _ in 0..n_pulses {
            e.push(SequenceElement::Delay(tau));
            e.push(p);
        }
    }
    PulseSequence::new(e, format!("CPMG-{n_pulses}({})", variant(symmetric)))
}

/// Symmetric `[tau/2 X tau Y tau/2]^2`, asymmetric `[tau X tau Y]^2`.
pub fn build_xy4(tau: f64, symmetric: bool) -> Result<PulseSequence> {
    check_tau(tau)?;
    use SequenceElement::Delay;
    let x = SequenceElement::pulse(PHASE_X);
    let y = SequenceElement::pulse(PHASE_Y);
    let half = if symmetric {
        vec![Delay(tau / 2.0), x, Delay(tau), y, Delay(tau / 2.0)]
    } else {
        vec![Delay(tau), x, Delay(tau), y]
    };
    Ok(PulseSequence::new(half, "")?
        .repeat(2)
        .with_label(format!("XY-4({})", variant(symmetric))))
}

/// XY-4 followed by its time reverse.
pub fn build_xy8(tau: f64, block_symmetric: bool) -> Result<PulseSequence> {
    let b = build_xy4(tau, block_symmetric)?;
    Ok(b.concat(&time_reverse(&b))
        .with_label(format!("XY-8({})", variant(block_symmetric))))
}

/// XY-8 followed by its phase-inverted copy.
pub fn build_xy16(tau: f64, block_symmetric: bool) -> Result<PulseSequence> {
    let b = build_xy8(tau, block_symmetric)?;
    Ok(b.concat(&phase_invert(&b))
        .with_label(format!("XY-16({})", variant(block_symmetric))))
}

/// Concatenated DD. Level 1 is XY-4; level `n` is `[C X C Y]^2` (asymmetric) or
/// `[H X C Y H]^2` (symmetric) with `C` the level `n-1` cycle and `H` its first
/// temporal half.
pub fn build_cdd(level: usize, tau: f64, symmetric: bool) -> Result<PulseSequence> {
    if level == 0 {
        return Err(Error::arg("CDD level must be >= 1"));
    }
    let label = format!("CDD-{level}({})", variant(symmetric));
    if level == 1 {
        return Ok(build_xy4(tau, symmetric)?.with_label(label));
    }
    let c = build_cdd(level - 1, tau, symmetric)?;
    let x = PulseSequence::new(vec![SequenceElement::pulse(PHASE_X)], "")?;
    let y = PulseSequence::new(vec![SequenceElement::pulse(PHASE_Y)], "")?;
    let half = if symmetric {
        let h = c.first_half()?;
        h.concat(&x).concat(&c).concat(&y).concat(&h)
    } else {
        c.concat(&x).concat(&c).concat(&y)
    };
    Ok(half.repeat(2).with_label(label))
}

/// Named builder with parameters, as used in configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "builder", rename_all = "snake_case")]
pub enum SequenceBuilder {
    Cpmg {
        n_pulses: usize,
        tau: f64,
        symmetric: bool,
        #[serde(default = "default_cpmg_phase")]
        phase: f64,
    },
    Xy4 {
        tau: f64,
        symmetric: bool,
    },
    Xy8 {
        tau: f64,
        symmetric: bool,
    },
    Xy16 {
        tau: f64,
        symmetric: bool,
    },
    Cdd {
        level: usize,
        tau: f64,
        symmetric: bool,
    },
}

fn default_cpmg_phase() -> f64 {
    PHASE_Y
}

impl SequenceBuilder {
    pub fn build(&self) -> Result<PulseSequence> {
        match *self {
            SequenceBuilder::Cpmg {
                n_pulses,
                tau,
                symmetric,
                phase,
            } => build_cpmg(n_pulses, tau, symmetric, phase),
            SequenceBuilder::Xy4 { tau, symmetric } => build_xy4(tau, symmetric),
            SequenceBuilder::Xy8 { tau, symmetric } => build_xy8(tau, symmetric),
            SequenceBuilder::Xy16 { tau, symmetric } => build_xy16(tau, symmetric),
            SequenceBuilder::Cdd { level, tau, symmetric } => build_cdd(level, tau, symmetric),
        }
    }

    pub fn tau(&self) -> f64 {
        match *self {
            SequenceBuilder::Cpmg { tau, .. }
            | SequenceBuilder::Xy4 { tau, .. }
            | SequenceBuilder::Xy8 { tau, .. }
            | SequenceBuilder::Xy16 { tau, .. }
            | SequenceBuilder::Cdd { tau, .. } => tau,
        }
    }
}

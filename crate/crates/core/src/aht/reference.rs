//! Closed-form average Hamiltonians for XY-4 and XY-8, transcribed as printed.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::HamiltonianParts;
use crate::opcore::{commutator, embed_spin_op, Operator, SpinAxis, I};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosedForm {
    /// `H0 = H_E` for either XY-4 variant.
    Xy4H0,
    /// `5 eps^2 pi^2 / (16 tau) S_z - sum_k b_k eps pi / 32 (S_x + S_y) I_z^k`
    Xy4SymH1,
    /// `5 eps^2 pi^2 / (16 tau) S_z - sum_k b_k eps pi / 16 S_x I_z^k + i tau S_z sum_k b_k [I_z^k, H_E]`
    Xy4AsymH1,
    /// Second order of XY-8 with `H_E = 0`:
    /// `13 eps^3 pi^3 / (1536 tau) (S_x + S_y) + sum_k eps^2 pi^2 b_k / 384 S_z I_z^k`,
    /// plus `sum_k eps b_k^2 tau / 368 S_y` for the asymmetric block.
    Xy8H2NoBath { symmetric: bool },
    /// Second order of XY-8 with ideal pulses:
    /// `tau^2 / 8 [[H_E, H_SE], H_E - H_SE / 3]`,
    /// plus `tau^2 / 8 [[H_E, H_SE], 7 H_E - H_SE]` for the asymmetric block.
    Xy8H2IdealPulses { symmetric: bool },
}

/// Bath operator `B = sum_k b_k I_z^k` with `H_SE = S_z (x) B`.
fn coupling_operator(parts: &HamiltonianParts) -> Operator {
    let half = parts.dim() / 2;
    &parts.h_se.block(0, 0, half) - &parts.h_se.block(1, 1, half)
}

fn system_op(axis: SpinAxis, bath: &Operator) -> Result<Operator> {
    Ok(embed_spin_op(0, axis, 1)?.kron(bath))
}

fn require(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::arg(msg))
    }
}

/// Evaluates the printed formula for `family` with the given couplings.
/// All families assume the resonant rotating frame (`H_S = 0`).
pub fn closed_form_reference(family: ClosedForm, parts: &HamiltonianParts, epsilon: f64, tau: f64) -> Result<Operator> {
    require(tau > 0.0 && tau.is_finite(), "tau must be positive")?;
    require(epsilon.is_finite(), "epsilon must be finite")?;
    require(parts.h_s.max_abs() == 0.0, "closed forms need H_S = 0")?;
    let dim = parts.dim();
    let bath_dim = dim / 2;
    let bath_id = Operator::identity(bath_dim);
    let b = coupling_operator(parts);
    let sz_rot = system_op(SpinAxis::Z, &bath_id)?.scale(5.0 * epsilon.powi(2) * PI.powi(2) / (16.0 * tau));
    let h_e = &parts.h_e;
    let h_se = &parts.h_se;
    let op = match family {
        ClosedForm::Xy4H0 => h_e.clone(),
        ClosedForm::Xy4SymH1 => {
            let sxy = &system_op(SpinAxis::X, &b)? + &system_op(SpinAxis::Y, &b)?;
            &sz_rot - &sxy.scale(epsilon * PI / 32.0)
        }
        ClosedForm::Xy4AsymH1 => {
            let sx = system_op(SpinAxis::X, &b)?.scale(epsilon * PI / 16.0);
            // S_z sum_k b_k [I_z^k, H_E] = [H_SE, H_E] since S_z commutes with H_E
            let comm = commutator(h_se, h_e)?.scale_c(I * tau);
            &(&sz_rot - &sx) + &comm
        }
        ClosedForm::Xy8H2NoBath { symmetric } => {
            require(h_e.max_abs() == 0.0, "this family needs H_E = 0")?;
            let sxy = &system_op(SpinAxis::X, &bath_id)? + &system_op(SpinAxis::Y, &bath_id)?;
            let mut out = sxy.scale(13.0 * epsilon.powi(3) * PI.powi(3) / (1536.0 * tau))
                + h_se.scale(epsilon.powi(2) * PI.powi(2) / 384.0);
            if !symmetric {
                // Tr(B^2) = sum_k b_k^2 * 2^K / 4
                let sum_b2 = 4.0 * (&b * &b).trace().re / bath_dim as f64;
                out += &system_op(SpinAxis::Y, &bath_id)?.scale(epsilon * sum_b2 * tau / 368.0);
            }
            out
        }
        ClosedForm::Xy8H2IdealPulses { symmetric } => {
            require(epsilon == 0.0, "this family needs ideal pulses (epsilon = 0)")?;
            let c = commutator(h_e, h_se)?;
            let mut out = commutator(&c, &(h_e - &h_se.scale(1.0 / 3.0)))?.scale(tau * tau / 8.0);
            if !symmetric {
                out += &commutator(&c, &(&h_e.scale(7.0) - h_se))?.scale(tau * tau / 8.0);
            }
            out
        }
    };
    Ok(op)
}

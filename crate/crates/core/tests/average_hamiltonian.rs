use std::f64::consts::PI;

use ddsym_core::aht::{
    average_hamiltonian, closed_form_reference, exact_average_hamiltonian, toggling_frame, toggling_time_symmetric,
    ClosedForm,
};
use ddsym_core::model::{build_hamiltonian, BathModel, HamiltonianParts, HamiltonianSpec};
use ddsym_core::opcore::{embed_spin_op, relative_distance, Operator, SpinAxis};
use ddsym_core::seq::{build_cdd, build_cpmg, build_xy16, build_xy4, build_xy8, PulseSequence, PHASE_X, PHASE_Y};
use proptest::prelude::*;

fn parts(k: usize, model: BathModel, seed: u64, scale: f64) -> HamiltonianParts {
    build_hamiltonian(&HamiltonianSpec::sampled(k, scale, 0.6 * scale, model, 0.0, seed).unwrap()).unwrap()
}

fn symmetric_sequences(tau: f64) -> Vec<PulseSequence> {
    vec![
        build_cpmg(2, tau, true, PHASE_Y).unwrap(),
        build_cpmg(4, tau, true, PHASE_X).unwrap(),
        build_xy4(tau, true).unwrap(),
        build_xy8(tau, true).unwrap(),
        build_xy8(tau, false).unwrap(),
        build_xy16(tau, true).unwrap(),
        build_cdd(2, tau, true).unwrap(),
    ]
}

/// Solves the 4x4 Vandermonde system for the coefficients of lambda^1..lambda^4.
fn fit_grades(lambdas: &[f64; 4], values: &[Operator; 4]) -> Vec<Operator> {
    let mut a = [[0.0; 4]; 4];
    for (i, l) in lambdas.iter().enumerate() {
        for j in 0..4 {
            a[i][j] = l.powi(j as i32 + 1);
        }
    }
    // Gauss-Jordan on the small real matrix; the right-hand sides are operators.
    let mut rhs: Vec<Operator> = values.to_vec();
    for col in 0..4 {
        let piv = (col..4)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        a.swap(col, piv);
        rhs.swap(col, piv);
        let p = a[col][col];
        for j in 0..4 {
            a[col][j] /= p;
        }
        rhs[col] = rhs[col].scale(1.0 / p);
        for row in 0..4 {
            if row != col {
                let f = a[row][col];
                for j in 0..4 {
                    a[row][j] -= f * a[col][j];
                }
                let sub = rhs[col].scale(f);
                rhs[row] -= &sub;
            }
        }
    }
    rhs
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn odd_order_vanishes_for_time_symmetric_cycles(seed in any::<u64>(), k in 1usize..4, tau in 0.2f64..3.0) {
        let p = parts(k, BathModel::SecularDipolar, seed, 0.4);
        for s in symmetric_sequences(tau) {
            prop_assert!(toggling_time_symmetric(&s, &p, 0.0).unwrap(), "{}", s.label());
            let ah = average_hamiltonian(&s, &p, 0.0, 1).unwrap();
            let bound = 1e-11 * ah.terms[0].frobenius_norm().max(1.0);
            prop_assert!(ah.terms[1].frobenius_norm() <= bound, "{}: {:e}", s.label(), ah.terms[1].frobenius_norm());
        }
    }

    #[test]
    fn zeroth_order_is_weighted_segment_mean(seed in any::<u64>(), k in 0usize..4, eps in 0.0f64..0.1, sym in any::<bool>()) {
        let p = parts(k, BathModel::SecularDipolar, seed, 0.5);
        for s in [build_xy4(1.3, sym).unwrap(), build_xy8(0.7, sym).unwrap(), build_cpmg(3, 2.0, sym, PHASE_Y).unwrap()] {
            let segs = toggling_frame(&s, &p, eps).unwrap();
            let mut mean = Operator::zeros(p.dim());
            for seg in &segs {
                mean += &seg.weight;
            }
            let mean = mean.scale(1.0 / s.cycle_time());
            let h0 = &average_hamiltonian(&s, &p, eps, 0).unwrap().terms[0];
            prop_assert!((h0 - &mean).max_abs() < 1e-14);
        }
    }
}

#[test]
fn asymmetric_variants_are_not_symmetric() {
    let p = parts(2, BathModel::SecularDipolar, 4, 0.4);
    for s in [
        build_xy4(1.0, false).unwrap(),
        build_cpmg(2, 1.0, false, PHASE_Y).unwrap(),
    ] {
        assert!(!toggling_time_symmetric(&s, &p, 0.0).unwrap(), "{}", s.label());
        let h1 = &average_hamiltonian(&s, &p, 0.0, 1).unwrap().terms[1];
        assert!(h1.frobenius_norm() > 1e-6, "{}", s.label());
    }
}

#[test]
fn asymmetric_cdd2_frames_form_a_palindrome() {
    // frames per window: IXZY XIYZ ZYIX YZXI
    let p = parts(2, BathModel::SecularDipolar, 4, 0.4);
    let s = build_cdd(2, 1.0, false).unwrap();
    assert!(toggling_time_symmetric(&s, &p, 0.0).unwrap());
    assert!(!toggling_time_symmetric(&s, &p, 0.05).unwrap());
}

#[test]
fn truncated_series_approaches_matrix_log() {
    let p = parts(2, BathModel::SecularDipolar, 9, 0.3);
    for s in [
        build_xy4(0.2, true).unwrap(),
        build_xy4(0.2, false).unwrap(),
        build_xy8(0.1, false).unwrap(),
    ] {
        let exact = exact_average_hamiltonian(&s, &p, 0.01).unwrap();
        let ah = average_hamiltonian(&s, &p, 0.01, 2).unwrap();
        let first = &ah.terms[0] + &ah.terms[1];
        let second = &first + &ah.terms[2];
        let e1 = (&exact - &first).frobenius_norm();
        let e2 = (&exact - &second).frobenius_norm();
        assert!(e2 < 0.1 * e1, "{}: {e1:e} {e2:e}", s.label());
    }
}

#[test]
fn xy4_zeroth_order_is_bath_hamiltonian() {
    let p = parts(3, BathModel::SecularDipolar, 2, 0.4);
    let reference = closed_form_reference(ClosedForm::Xy4H0, &p, 0.05, 1.5).unwrap();
    for sym in [true, false] {
        let h0 = &average_hamiltonian(&build_xy4(1.5, sym).unwrap(), &p, 0.05, 0)
            .unwrap()
            .terms[0];
        assert!(relative_distance(h0, &reference) < 1e-12);
    }
}

#[test]
fn xy8_second_order_with_ideal_pulses_matches_closed_form() {
    for seed in 0..5 {
        let p = parts(3, BathModel::SecularDipolar, seed, 0.5);
        let tau = 0.8;
        for sym in [true, false] {
            let ah = average_hamiltonian(&build_xy8(tau, sym).unwrap(), &p, 0.0, 2).unwrap();
            let reference =
                closed_form_reference(ClosedForm::Xy8H2IdealPulses { symmetric: sym }, &p, 0.0, tau).unwrap();
            let d = relative_distance(&ah.terms[2], &reference);
            assert!(
                d < 1e-9 * reference.frobenius_norm().max(1.0),
                "seed {seed} sym {sym}: {d:e}"
            );
        }
    }
}

#[test]
fn xy8_pulse_error_term_without_bath_from_grade_fit() {
    // H_E = 0, H_SE = 0: the only small quantity is eps, so the exact log is a
    // power series in eps and its cubic coefficient is H2.
    let p = parts(0, BathModel::None, 0, 0.1);
    let (tau, eps) = (1.0, 0.05);
    let lambdas = [0.04, 0.02, 0.01, 0.005];
    for sym in [true, false] {
        let s = build_xy8(tau, sym).unwrap();
        let values: [Operator; 4] = lambdas.map(|l| exact_average_hamiltonian(&s, &p, l * eps).unwrap());
        let grades = fit_grades(&lambdas, &values);
        let bch = average_hamiltonian(&s, &p, eps, 2).unwrap();
        let scale = bch.terms[2].max_abs();
        assert!((&grades[2] - &bch.terms[2]).max_abs() < 1e-3 * scale, "sym {sym}");
        // eps^3 pi^3 / (8 tau) (S_x + S_y)
        let sx = embed_spin_op(0, SpinAxis::X, 1).unwrap();
        let sy = embed_spin_op(0, SpinAxis::Y, 1).unwrap();
        let expected = (&sx + &sy).scale((eps * PI).powi(3) / (8.0 * tau));
        assert!(
            (&bch.terms[2] - &expected).max_abs() < 1e-12,
            "sym {sym}: {}",
            bch.terms[2]
        );
    }
}

#[test]
fn xy4_first_order_from_grade_fit() {
    // eps and every coupling carry one power of lambda; the lambda^2 coefficient is H1
    let lambdas = [0.04, 0.02, 0.01, 0.005];
    let (tau, eps) = (1.0, 0.05);
    let (b, d) = (vec![0.3, -0.2], vec![0.4]);
    let scaled = |l: f64| {
        let spec = HamiltonianSpec {
            n_bath: 2,
            omega_s: 0.0,
            b: b.iter().map(|v| l * v).collect(),
            bath_model: BathModel::SecularDipolar,
            d: d.iter().map(|v| l * v).collect(),
            epsilon: 0.0,
            seed: 0,
        };
        build_hamiltonian(&spec).unwrap()
    };
    for sym in [true, false] {
        let s = build_xy4(tau, sym).unwrap();
        let values: [Operator; 4] = lambdas.map(|l| exact_average_hamiltonian(&s, &scaled(l), l * eps).unwrap());
        let grades = fit_grades(&lambdas, &values);
        let bch = average_hamiltonian(&s, &scaled(1.0), eps, 1).unwrap();
        let scale = bch.terms[1].max_abs();
        assert!((&grades[1] - &bch.terms[1]).max_abs() < 1e-4 * scale, "sym {sym}");
        assert!(
            (&grades[0] - &bch.terms[0]).max_abs() < 1e-4 * bch.terms[0].max_abs(),
            "sym {sym}"
        );
    }
}

use std::f64::consts::PI;

use ddsym_core::seq::{
    build_cdd, build_cpmg, build_xy16, build_xy4, build_xy8, format_sequence, parse_sequence, phase_invert,
    time_reverse, PulseSequence, SequenceBuilder, SequenceElement, PHASE_X, PHASE_Y,
};
use proptest::prelude::*;

fn element() -> impl Strategy<Value = SequenceElement> {
    prop_oneof![
        (0.0f64..100.0).prop_map(SequenceElement::Delay),
        (0u32..4).prop_map(|q| SequenceElement::pulse(q as f64 * PI / 2.0)),
        (0.0f64..360.0).prop_map(|deg| SequenceElement::pulse(deg.to_radians())),
        Just(SequenceElement::Delay(0.0)),
    ]
}

fn sequence() -> impl Strategy<Value = PulseSequence> {
    prop::collection::vec(element(), 1..24).prop_map(|e| PulseSequence::new(e, "random").unwrap())
}

fn quadrature_sequence() -> impl Strategy<Value = PulseSequence> {
    let e = prop_oneof![
        (0.0f64..100.0).prop_map(SequenceElement::Delay),
        (0u32..4).prop_map(|q| SequenceElement::pulse(q as f64 * PI / 2.0)),
    ];
    prop::collection::vec(e, 1..24).prop_map(|e| PulseSequence::new(e, "quadrature").unwrap())
}

/// Same timing, phases equal modulo 2pi to within a few ulps.
fn same_up_to_rounding(a: &PulseSequence, b: &PulseSequence) -> bool {
    a.elements().len() == b.elements().len()
        && a.elements().iter().zip(b.elements()).all(|(x, y)| match (*x, *y) {
            (SequenceElement::Delay(p), SequenceElement::Delay(q)) => p == q,
            (SequenceElement::Pulse { phase: p }, SequenceElement::Pulse { phase: q }) => {
                let d = (p - q).rem_euclid(2.0 * PI);
                d.min(2.0 * PI - d) < 1e-14
            }
            _ => false,
        })
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn dsl_round_trip(s in sequence()) {
        let text = format_sequence(&s);
        let back = parse_sequence(&text).unwrap();
        prop_assert_eq!(back.elements(), s.elements(), "{}", text);
    }
}

proptest! {
    #[test]
    fn transforms_are_involutions(s in quadrature_sequence()) {
        prop_assert_eq!(time_reverse(&time_reverse(&s)).elements().to_vec(), s.elements().to_vec());
        prop_assert_eq!(phase_invert(&phase_invert(&s)).elements().to_vec(), s.elements().to_vec());
    }

    #[test]
    fn phase_inversion_of_arbitrary_phases(s in sequence()) {
        prop_assert_eq!(time_reverse(&time_reverse(&s)).elements().to_vec(), s.elements().to_vec());
        prop_assert!(same_up_to_rounding(&phase_invert(&phase_invert(&s)), &s));
    }

    #[test]
    fn transforms_preserve_timing_and_pulses(s in sequence()) {
        let r = time_reverse(&s);
        prop_assert_eq!(r.cycle_time(), s.cycle_time());
        prop_assert_eq!(sorted(r.phases()), sorted(s.phases()));
        let inv = phase_invert(&s);
        prop_assert_eq!(inv.pulse_count(), s.pulse_count());
        prop_assert_eq!(inv.delays(), s.delays());
    }

    #[test]
    fn xy8_is_block_plus_reverse(tau in 0.01f64..50.0, sym in any::<bool>()) {
        let b = build_xy4(tau, sym).unwrap();
        let xy8 = build_xy8(tau, sym).unwrap();
        prop_assert_eq!(xy8.elements().to_vec(), b.concat(&time_reverse(&b)).elements().to_vec());
        let xy16 = build_xy16(tau, sym).unwrap();
        prop_assert_eq!(xy16.elements().to_vec(), xy8.concat(&phase_invert(&xy8)).elements().to_vec());
    }

    #[test]
    fn cdd1_is_xy4(tau in 0.01f64..50.0, sym in any::<bool>()) {
        prop_assert_eq!(build_cdd(1, tau, sym).unwrap().elements().to_vec(), build_xy4(tau, sym).unwrap().elements().to_vec());
    }
}

#[test]
fn builder_pulse_counts() {
    for sym in [true, false] {
        assert_eq!(build_xy4(1.0, sym).unwrap().pulse_count(), 4);
        assert_eq!(build_xy8(1.0, sym).unwrap().pulse_count(), 8);
        assert_eq!(build_xy16(1.0, sym).unwrap().pulse_count(), 16);
        assert_eq!(build_cpmg(6, 1.0, sym, PHASE_Y).unwrap().pulse_count(), 6);
        // P(n) = 4 P(n-1) + 4 for the symmetric skeleton, 4 P(n-1) + 4 for the asymmetric one
        let mut expected = 4;
        for level in 1..=3 {
            assert_eq!(
                build_cdd(level, 1.0, sym).unwrap().pulse_count(),
                expected,
                "level {level}"
            );
            expected = 4 * expected + 4;
        }
    }
}

#[test]
fn builder_cycle_times() {
    let tau = 2.5;
    for sym in [true, false] {
        assert_eq!(build_xy4(tau, sym).unwrap().cycle_time(), 4.0 * tau);
        assert_eq!(build_xy8(tau, sym).unwrap().cycle_time(), 8.0 * tau);
        assert_eq!(build_xy16(tau, sym).unwrap().cycle_time(), 16.0 * tau);
        assert_eq!(build_cpmg(3, tau, sym, PHASE_X).unwrap().cycle_time(), 3.0 * tau);
    }
}

#[test]
fn asymmetric_xy8_keeps_back_to_back_pulses() {
    let s = build_xy8(1.0, false).unwrap();
    assert!(
        s.elements().windows(2).any(|w| w[0].is_pulse() && w[1].is_pulse()),
        "{s}"
    );
    assert_eq!(s.merged().pulse_count(), 8);
}

#[test]
fn named_builders() {
    let b = SequenceBuilder::Cdd {
        level: 2,
        tau: 12.5,
        symmetric: true,
    };
    assert_eq!(b.build().unwrap().pulse_count(), 20);
    assert_eq!(b.build().unwrap().cycle_time(), 16.0 * 12.5);
    assert_eq!(b.tau(), 12.5);
}

#[test]
fn dsl_examples() {
    let s = parse_sequence("# symmetric XY-4\nd5 X d10 Y d10 X d10 Y d5").unwrap();
    assert_eq!(s.elements(), build_xy4(10.0, true).unwrap().merged().elements());
    assert_eq!(
        parse_sequence("4x[d10 X]").unwrap().elements(),
        build_cpmg(4, 10.0, false, PHASE_X).unwrap().elements()
    );
}

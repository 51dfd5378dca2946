use forage_core::allocation::{AllocationState, Mode, ObjectType, VdrParams, VdrState};
use num_rational::Ratio;
use proptest::prelude::*;

fn leave_params() -> VdrParams<f64> {
    VdrParams::new(0.08, 0.002, 0.04, 0.0015).unwrap()
}

fn obj_params() -> [VdrParams<f64>; 2] {
    [VdrParams::new(0.15, 0.002, 0.075, 0.0025).unwrap(); 2]
}

/// Straight transcription of the update rule with separate counters.
fn replay(outcomes: &[bool], p_max: f64, p_min: f64, p_initial: f64, delta: f64) -> (f64, u32, u32) {
    let mut succ = 0u32;
    let mut fail = 0u32;
    let mut p = p_initial;
    for &success in outcomes {
        if success {
            succ += 1;
            fail = 0;
            p = p_max.min(p + succ as f64 * delta);
        }
        if !success {
            fail += 1;
            succ = 0;
            p = p_min.max(p - fail as f64 * delta);
        }
    }
    (p, succ, fail)
}

fn params_strategy() -> impl Strategy<Value = VdrParams<f64>> {
    (0.0f64..0.5, 0.0f64..0.5, 0.0f64..1.0, 1e-4f64..0.05).prop_map(|(lo, span, t, delta)| {
        let hi = (lo + span).min(1.0);
        VdrParams::new(hi, lo, lo + t * (hi - lo), delta).unwrap()
    })
}

proptest! {
    #[test]
    fn probability_stays_in_bounds(params in params_strategy(), outcomes in prop::collection::vec(any::<bool>(), 0..300)) {
        let mut s = VdrState::new(&params);
        for o in outcomes {
            s = s.update(o, &params);
            prop_assert!(params.contains(s.p));
        }
    }

    #[test]
    fn streaks_are_exclusive(params in params_strategy(), outcomes in prop::collection::vec(any::<bool>(), 1..300)) {
        let mut s = VdrState::new(&params);
        for o in outcomes {
            s = s.update(o, &params);
            prop_assert!(s.succ_streak == 0 || s.fail_streak == 0);
            prop_assert!(s.succ_streak + s.fail_streak >= 1);
        }
    }

    #[test]
    fn incremental_matches_replay(outcomes in prop::collection::vec(any::<bool>(), 0..500)) {
        let p = leave_params();
        let s = outcomes.iter().fold(VdrState::new(&p), |s, &o| s.update(o, &p));
        let (rp, succ, fail) = replay(&outcomes, p.p_max, p.p_min, p.p_initial, p.delta);
        prop_assert_eq!(s.p.to_bits(), rp.to_bits());
        prop_assert_eq!((s.succ_streak, s.fail_streak), (succ, fail));
    }

    #[test]
    fn unclamped_success_run_is_triangular(k in 1u32..60, num in 1i64..20, den in 100i64..2000) {
        let delta = Ratio::new(num, den * 1000);
        let params = VdrParams::new(Ratio::from_integer(1), Ratio::from_integer(0), Ratio::new(1, 2), delta).unwrap();
        let mut s = VdrState::new(&params);
        let mut last = s.p;
        for _ in 0..k {
            s = s.success(&params);
            prop_assert!(s.p >= last);
            last = s.p;
        }
        let triangular = Ratio::from_integer(i64::from(k) * i64::from(k + 1) / 2);
        let expected = Ratio::new(1, 2) + triangular * delta;
        if expected <= Ratio::from_integer(1) {
            prop_assert_eq!(s.p, expected);
        } else {
            prop_assert_eq!(s.p, Ratio::from_integer(1));
        }
    }

    #[test]
    fn original_mode_never_touches_object_states(outcomes in prop::collection::vec(any::<bool>(), 0..200)) {
        let mut a = AllocationState::new(Mode::Original, &leave_params(), &obj_params());
        let before = a.obj;
        for o in outcomes {
            a = a.record_trip_outcome(None, o, &leave_params(), &obj_params()).unwrap().0;
        }
        prop_assert_eq!(a.obj[0].p.to_bits(), before[0].p.to_bits());
        prop_assert_eq!(a.obj[1].p.to_bits(), before[1].p.to_bits());
        prop_assert_eq!(a.obj, before);
    }

    #[test]
    fn modified_mode_updates_only_the_assigned_type(
        trips in prop::collection::vec((any::<bool>(), any::<bool>()), 1..200),
    ) {
        let mut a = AllocationState::new(Mode::Modified, &leave_params(), &obj_params());
        for (type2, delivered) in trips {
            let t = if type2 { ObjectType::Type2 } else { ObjectType::Type1 };
            let other = a.obj[1 - t.index()];
            a = a.record_trip_outcome(Some(t), delivered, &leave_params(), &obj_params()).unwrap().0;
            prop_assert_eq!(a.obj[1 - t.index()], other);
            prop_assert_eq!(a.obj[t.index()].succ_streak > 0, delivered);
        }
    }

    #[test]
    fn assignment_is_proportional(p1 in 0.002f64..0.15, p2 in 0.002f64..0.15, u in 0.0f64..1.0) {
        let mut a = AllocationState::new(Mode::Modified, &leave_params(), &obj_params());
        a.obj[0].p = p1;
        a.obj[1].p = p2;
        let t = a.assign_task(u).unwrap();
        prop_assert_eq!(t == ObjectType::Type1, u < p1 / (p1 + p2));
    }
}

#[test]
fn mixed_sequence_replays_exactly() {
    // set1 leave parameters, a mixed sequence.
    let p: VdrParams<f64> = VdrParams::new(0.08, 0.002, 0.04, 0.0003).unwrap();
    let seq = [true, true, true, false, false, true, false, false, false, false];
    let s = seq.iter().fold(VdrState::new(&p), |s, &o| s.update(o, &p));
    let (rp, succ, fail) = replay(&seq, 0.08, 0.002, 0.04, 0.0003);
    assert_eq!(s.p.to_bits(), rp.to_bits());
    assert_eq!((s.succ_streak, s.fail_streak), (succ, fail));
    assert_eq!((succ, fail), (0, 4));
}

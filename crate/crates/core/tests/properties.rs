use proptest::prelude::*;

use tendon_refine::model::MuscleVector;
use tendon_refine::plant::{target_tension, MotorControllerParams};
use tendon_refine::refine::{
    antagonist_law, apply_corrections, moving_average, AntagonistParams, CorrectionProfile, Provenance,
};
use tendon_refine::trajectory::MuscleTrajectory;

proptest! {
    #[test]
    fn tension_is_floored_and_monotone(
        k in 1.0..5000.0f64,
        off in 0.0..2.0f64,
        l_ref in 0.1..0.5f64,
        a in -0.05..0.05f64,
        b in -0.05..0.05f64,
    ) {
        let p = MotorControllerParams::uniform(1, k, off).unwrap();
        let r = MuscleVector::from_slice(&[l_ref]);
        let t = |d: f64| target_tension(&p, &MuscleVector::from_slice(&[l_ref + d]), &r).unwrap()[0];
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(t(lo) >= off);
        prop_assert!(t(lo) <= t(hi));
    }

    #[test]
    fn antagonist_law_is_nonnegative(gain in 0.0..0.01f64, threshold in 0.0..5.0f64, t in -1.0..20.0f64) {
        let p = AntagonistParams { gain, threshold, smoothing_window: 1 };
        let c = antagonist_law(&p, t);
        prop_assert!(c >= 0.0);
        prop_assert!(c <= gain * (t - threshold).max(0.0) * (1.0 + 1e-12));
    }

    #[test]
    fn moving_average_keeps_constants_and_bounds(
        values in prop::collection::vec(-10.0..10.0f64, 1..200),
        half in 0usize..30,
        level in -5.0..5.0f64,
    ) {
        let window = 2 * half + 1;
        let flat = moving_average(&vec![level; values.len()], window);
        for v in flat {
            prop_assert!((v - level).abs() <= 1e-12 * level.abs().max(1.0));
        }
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for v in moving_average(&values, window) {
            prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
        }
    }

    #[test]
    fn zero_profile_leaves_reference_unchanged(
        lengths in prop::collection::vec(0.1..0.5f64, 2..50),
    ) {
        let samples: Vec<_> = lengths.iter().map(|l| MuscleVector::from_slice(&[*l, 0.6 - l])).collect();
        let reference = MuscleTrajectory::new(0.005, samples).unwrap();
        let zero = CorrectionProfile::zeros(Provenance::Antagonist, 0.005, reference.len(), 2);
        let out = apply_corrections(&reference, &[&zero]).unwrap();
        prop_assert_eq!(out.samples, reference.samples);
    }
}

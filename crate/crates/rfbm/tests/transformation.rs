//! The time-change identity: queue-supremum and field-supremum Monte Carlo
//! must estimate the same probability.

use rfbm::asymptotics::derive_constants;
use rfbm::fbm::Hurst;
use rfbm::field::{transformation_check, TransformationMcParams};

#[test]
fn queue_and_field_estimates_agree_at_unit_level() {
    let h = Hurst::new(0.5f64).unwrap();
    let k = derive_constants(h);
    let mc = TransformationMcParams {
        reps: 3000,
        dt: 1.0 / 32.0,
        tau_max: 16.0,
        seed: 11,
    };
    let (left, right) = transformation_check(1.0, 1.0, &mc, h, &k).unwrap();
    let gap = (left.value - right.value).abs();
    let allowed = 3.0 * (left.std_error + right.std_error);
    assert!(
        gap <= allowed,
        "left {} (se {}), right {} (se {}): gap {gap} > {allowed}",
        left.value,
        left.std_error,
        right.value,
        right.std_error
    );
    // deterministic given seeds
    let (l2, r2) = transformation_check(1.0, 1.0, &mc, h, &k).unwrap();
    assert_eq!(left.value, l2.value);
    assert_eq!(right.value, r2.value);
}

#[test]
fn both_sides_approach_one_at_vanishing_level() {
    let h = Hurst::new(0.5f64).unwrap();
    let k = derive_constants(h);
    let mc = TransformationMcParams {
        reps: 800,
        dt: 1.0 / 16.0,
        tau_max: 8.0,
        seed: 12,
    };
    let (left, right) = transformation_check(0.05, 1.0, &mc, h, &k).unwrap();
    assert!(left.value > 0.97, "queue side {}", left.value);
    assert!(right.value > 0.97, "field side {}", right.value);
}

#[test]
fn infeasible_level_is_reported() {
    let h = Hurst::new(0.5f64).unwrap();
    let k = derive_constants(h);
    let mc = TransformationMcParams {
        reps: 100,
        dt: 0.25,
        tau_max: 4.0,
        seed: 14,
    };
    let err = transformation_check(40.0, 1.0, &mc, h, &k);
    assert!(matches!(err, Err(rfbm::Error::InfeasibleLevel { .. })));
}

#[test]
fn agreement_holds_for_persistent_hurst() {
    let h = Hurst::new(0.7f64).unwrap();
    let k = derive_constants(h);
    let mc = TransformationMcParams {
        reps: 2000,
        dt: 1.0 / 24.0,
        tau_max: 24.0,
        seed: 13,
    };
    let (left, right) = transformation_check(1.0, 1.0, &mc, h, &k).unwrap();
    let gap = (left.value - right.value).abs();
    let allowed = 3.0 * (left.std_error + right.std_error);
    assert!(gap <= allowed, "left {}, right {}", left.value, right.value);
}

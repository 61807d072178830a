//! Cross-method and self-consistency checks of the storage simulators.

use rfbm::asymptotics::derive_constants;
use rfbm::fbm::Hurst;
use rfbm::numeric::two_sample_ks;
use rfbm::storage::{
    simulate_reflected, simulate_stationary, sup_tail_probability, SupTailParams, WindowSpec,
};

fn subsample(values: &[f64], stride: usize) -> Vec<f64> {
    values.iter().step_by(stride).copied().collect()
}

#[test]
fn reflected_relaxes_to_stationary_law() {
    // marginals of the reflected path after burn-in >= 5 W agree with the
    // truncated-sup sampler (two-sample KS, 1% level); subsampling keeps the
    // KS test honest about sample correlation
    let hh = 0.6;
    let h = Hurst::new(hh).unwrap();
    let k = derive_constants(h);
    let dt = 0.05;
    let window = WindowSpec::Auto {
        kappa: 8.0,
        max_level: 1.5,
    }
    .resolve(&k, dt)
    .unwrap();
    let burn = 5.0 * window;
    let horizon = burn + 1200.0;
    let reflected = simulate_reflected(0.0, horizon, dt, h, 31).unwrap();
    let after_burn = reflected.restrict(burn);
    let stationary = simulate_stationary(1200.0, dt, window, h, 32).unwrap();
    let stride = (6.0 / dt) as usize; // ~6 time units apart
    let a = subsample(&after_burn.values, stride);
    let b = subsample(&stationary.values, stride);
    let t = two_sample_ks(&a, &b);
    assert!(
        t.p_value > 0.01,
        "KS rejected: D = {}, p = {} ({} vs {} samples)",
        t.statistic,
        t.p_value,
        a.len(),
        b.len()
    );
}

#[test]
fn stationary_halves_agree() {
    // stationarity proxy: disjoint halves of one path have matching
    // marginals for (at least) 9 of 10 seeds at the 1% level
    let h = Hurst::new(0.5f64).unwrap();
    let k = derive_constants(h);
    let dt = 0.1;
    let window = WindowSpec::Auto {
        kappa: 8.0,
        max_level: 1.5,
    }
    .resolve(&k, dt)
    .unwrap();
    let mut passes = 0;
    for seed in 0..10 {
        let qp = simulate_stationary(3000.0, dt, window, h, 400 + seed).unwrap();
        let stride = (5.0 / dt) as usize;
        let mid = qp.values.len() / 2;
        let a = subsample(&qp.values[..mid], stride);
        let b = subsample(&qp.values[mid..], stride);
        if two_sample_ks(&a, &b).p_value > 0.01 {
            passes += 1;
        }
    }
    assert!(passes >= 9, "only {passes} of 10 seeds passed the KS check");
}

#[test]
fn window_doubling_leaves_tail_estimates_alone() {
    // sup-norm change of the marginal tail under W -> 2W within 3 se
    let h = Hurst::new(0.5f64).unwrap();
    rfbm::storage::window_doubling_check(8.0, 0.1, 2.0, h, 77, 4000).unwrap();
}

#[test]
fn grid_refinement_moves_sup_estimates_within_noise() {
    // halving dt changes the sup-tail estimate by <= 3 combined se (the
    // estimator is biased low; the bias must sit below Monte Carlo noise)
    let h = Hurst::new(0.5f64).unwrap();
    let k = derive_constants(h);
    let base = SupTailParams {
        interval_t: 1.0,
        level: 1.5,
        dt: 0.1,
        window: WindowSpec::Auto {
            kappa: 8.0,
            max_level: 2.0,
        },
        reps: 6000,
        seed: 5,
        validate_window: false,
    };
    let coarse = sup_tail_probability(&base, h, &k).unwrap();
    let fine = sup_tail_probability(
        &SupTailParams {
            dt: 0.05,
            seed: 6,
            ..base
        },
        h,
        &k,
    )
    .unwrap();
    let finer = sup_tail_probability(
        &SupTailParams {
            dt: 0.025,
            seed: 7,
            ..base
        },
        h,
        &k,
    )
    .unwrap();
    assert!(coarse.value <= fine.value + 3.0 * (coarse.std_error + fine.std_error));
    assert!(
        (fine.value - finer.value).abs() <= 3.0 * (fine.std_error + finer.std_error),
        "dt/2 moved the estimate from {} to {}",
        fine.value,
        finer.value
    );
}

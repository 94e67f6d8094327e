//! Cross-module checks through the public API only.

use std::f64::consts::FRAC_PI_4;

use eqw_core::analysis::{
    fit_power_law, gaussianity_check, moments, trace_distance_channel, TraceExperiment,
};
use eqw_core::classical::{erw_ensemble_moments, ErwParams};
use eqw_core::spectral::{evolve_two_point_channel, predict_variance_law};
use eqw_core::walk::{evolve_standard, run_ensemble};
use eqw_core::{
    make_localized, position_distribution, reduced_coin_density, CoinBlochState, CoinParams,
    GaussianPacketSpec, StepSizeRule,
};

#[test]
fn ensemble_moments_agree_with_its_distributions() {
    let init = make_localized(0, CoinBlochState::symmetric());
    let e = run_ensemble(
        &init,
        CoinParams::noiseless(0.6),
        StepSizeRule::Interval,
        24,
        &[6, 12, 24],
        400,
        11,
    )
    .unwrap();
    for (row, dist) in e.moments.iter().zip(&e.distributions) {
        let m = moments(dist);
        assert!((dist.total() - 1.0).abs() < 1e-10);
        assert!((m.mean - row.mean).abs() < 1e-9 * (1.0 + row.mean.abs()));
        assert!((m.variance - row.var).abs() < 1e-9 * row.var);
    }
    let mut csv = Vec::new();
    e.write_moments_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 4);
}

#[test]
fn noiseless_unit_ensemble_is_the_exact_walk() {
    let init = make_localized(0, CoinBlochState::new(1.0, 0.3).unwrap());
    let e = run_ensemble(
        &init,
        CoinParams::noiseless(0.9),
        StepSizeRule::Unit,
        30,
        &[30],
        5,
        3,
    )
    .unwrap();
    let mut s = init.clone();
    evolve_standard(&mut s, 0.9, 30);
    let exact = position_distribution(&s);
    for (l, p) in exact.sites() {
        assert!((e.distributions[0].get(l) - p).abs() < 1e-12);
    }
}

#[test]
fn channel_variance_is_cubic_and_gaussian() {
    let init = make_localized(0, CoinBlochState::symmetric());
    let law = predict_variance_law(1024, FRAC_PI_4, &init, &[8, 12, 16, 24, 32, 40]).unwrap();
    assert!(
        (law.fit.exponent - 3.0).abs() < 0.25,
        "{}",
        law.fit.exponent
    );
    let g = gaussianity_check(&law.channel.distributions[40]).unwrap();
    assert!(g.excess_kurtosis.abs() < 0.3, "{}", g.excess_kurtosis);
}

#[test]
fn standard_walk_variance_is_ballistic() {
    let mut s = make_localized(0, CoinBlochState::symmetric());
    let mut t = Vec::new();
    let mut v = Vec::new();
    for step in 1..=200 {
        evolve_standard(&mut s, 1.0, 1);
        t.push(step as f64);
        v.push(moments(&position_distribution(&s)).variance);
    }
    let f = fit_power_law(&t, &v, (40.0, 200.0)).unwrap();
    assert!((f.exponent - 2.0).abs() < 0.05);
}

#[test]
fn trace_distance_starts_at_one_for_antipodal_coins() {
    let cfg = TraceExperiment {
        coin_a: CoinBlochState::NORTH,
        coin_b: CoinBlochState::SOUTH,
        packet: GaussianPacketSpec {
            center: 0,
            delta: 0.05,
        },
        truncation: 6.0,
        coin: CoinParams::noiseless(FRAC_PI_4),
        rule: StepSizeRule::Interval,
        steps: 10,
        trajectories: 1,
        seed: 0,
    };
    let s = trace_distance_channel(&cfg, 256).unwrap();
    assert!((s.distances[0] - 1.0).abs() < 1e-12);
    assert!(s.distances.iter().all(|d| (0.0..=1.0 + 1e-12).contains(d)));
}

#[test]
fn channel_coin_density_matches_localized_start() {
    let coin = CoinBlochState::new(0.7, 1.1).unwrap();
    let init = make_localized(0, coin);
    let r = evolve_two_point_channel(
        128,
        3,
        CoinParams::noiseless(0.4),
        &init,
        StepSizeRule::Interval,
    )
    .unwrap();
    let start = reduced_coin_density(&init);
    for i in 0..2 {
        for j in 0..2 {
            assert!((r.coin_densities[0].rho[i][j] - start.rho[i][j]).norm() < 1e-12);
        }
    }
}

#[test]
fn classical_symmetric_walk_is_diffusive() {
    let m = erw_ensemble_moments(&ErwParams::new(0.5, 0.5, 512, 4000).unwrap(), 21).unwrap();
    let f = fit_power_law(&m.times(), &m.variances(), (32.0, 512.0)).unwrap();
    assert!((f.exponent - 1.0).abs() < 0.1, "{}", f.exponent);
}

//! Coin and shift operators with the step rules of the standard and elephant quantum walks.

mod conditional;
pub(crate) mod ensemble;
mod trajectory;

pub use conditional::{
    conditional_step_distribution, contrarian_parity_counts, ConditionalTable, Estimate, MAX_DEPTH,
};
pub use ensemble::{run_ensemble, EnsembleResult, MomentRow};
pub use trajectory::{run_trajectory, TrajectoryRecord};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lattice::WalkState;

/// Coin angle and optional per-step angle jitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoinParams {
    pub theta: f64,
    pub noise_epsilon: f64,
}

impl CoinParams {
    pub fn new(theta: f64, noise_epsilon: f64) -> Result<Self> {
        if !theta.is_finite() {
            return Err(invalid("theta", "must be finite"));
        }
        if !(noise_epsilon >= 0.0) || !noise_epsilon.is_finite() {
            return Err(invalid(
                "noise_epsilon",
                format!("{noise_epsilon} must be >= 0"),
            ));
        }
        Ok(Self {
            theta,
            noise_epsilon,
        })
    }

    pub fn noiseless(theta: f64) -> Self {
        Self {
            theta,
            noise_epsilon: 0.0,
        }
    }

    /// Draws the angle used for one step. Consumes no randomness when
    /// noiseless.
    pub fn effective_angle<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        sample_coin_noise(self.theta, self.noise_epsilon, rng)
    }
}

/// `θ + ξ` with `ξ` uniform on `[-ε, ε]`.
pub fn sample_coin_noise<R: Rng + ?Sized>(theta: f64, epsilon: f64, rng: &mut R) -> f64 {
    if epsilon == 0.0 {
        theta
    } else {
        theta + rng.random_range(-epsilon..=epsilon)
    }
}

/// Law of the step magnitude `Δ_t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepSizeRule {
    /// `Δ_t = 1`: the standard walk.
    Unit,
    /// `Δ_t` uniform on the integers `{1-t, …, 1+t}`.
    Interval,
}

impl StepSizeRule {
    /// Draws `Δ_t` for step `t ≥ 1`.
    pub fn sample<R: Rng + ?Sized>(&self, t: u64, rng: &mut R) -> i64 {
        match self {
            StepSizeRule::Unit => 1,
            StepSizeRule::Interval => {
                let t = t.max(1) as i64;
                rng.random_range(1 - t..=1 + t)
            }
        }
    }
}

pub fn sample_step_size<R: Rng + ?Sized>(rule: StepSizeRule, t: u64, rng: &mut R) -> i64 {
    rule.sample(t, rng)
}

impl WalkState {
    /// Applies `[[cos θ, i sin θ], [i sin θ, cos θ]]` at every site.
    pub fn apply_coin(&mut self, theta: f64) {
        let (c, s) = (theta.cos(), theta.sin());
        let (up, down) = self.window_mut();
        for (u, d) in up.iter_mut().zip(down.iter_mut()) {
            let (x, y) = (*u, *d);
            u.re = c * x.re - s * y.im;
            u.im = c * x.im + s * y.re;
            d.re = c * y.re - s * x.im;
            d.im = c * y.im + s * x.re;
        }
    }

    /// Moves `ψ↑` by `+delta` sites and `ψ↓` by `-delta` sites.
    pub fn apply_shift(&mut self, delta: i64) {
        self.translate(delta);
    }
}

/// One step with a given coin angle and step size: coin, then shift.
pub fn step_elephant(state: &mut WalkState, theta: f64, delta: i64) {
    state.apply_coin(theta);
    state.apply_shift(delta);
    state.set_time(state.time() + 1);
}

/// One step of the standard walk (`Δ = 1`).
pub fn step_standard<R: Rng + ?Sized>(state: &mut WalkState, coin: CoinParams, rng: &mut R) {
    let theta = coin.effective_angle(rng);
    step_elephant(state, theta, 1);
}

/// Runs `steps` steps of the noiseless standard walk.
pub fn evolve_standard(state: &mut WalkState, theta: f64, steps: usize) {
    for _ in 0..steps {
        step_elephant(state, theta, 1);
    }
}

/// Shared per-step driver: draws `Δ_t` then the coin angle, advances, and
/// calls `observe` at each snapshot time (including `t = 0`).
pub(crate) fn drive<R, F>(
    state: &mut WalkState,
    coin: CoinParams,
    rule: StepSizeRule,
    steps: usize,
    snapshots: &[usize],
    rng: &mut R,
    mut observe: F,
) -> Vec<i64>
where
    R: Rng + ?Sized,
    F: FnMut(usize, &WalkState),
{
    let mut next = snapshots.iter().peekable();
    let mut deltas = Vec::with_capacity(steps);
    if next.peek() == Some(&&0) {
        observe(0, state);
        next.next();
    }
    for t in 1..=steps {
        let delta = rule.sample(t as u64, rng);
        let theta = coin.effective_angle(rng);
        step_elephant(state, theta, delta);
        deltas.push(delta);
        if next.peek() == Some(&&t) {
            observe(t, state);
            next.next();
        }
    }
    deltas
}

/// Sorted, deduplicated snapshot list, validated against the horizon.
pub(crate) fn normalize_snapshots(snapshots: &[usize], steps: usize) -> Result<Vec<usize>> {
    if steps == 0 {
        return Err(invalid("steps", "must be at least 1"));
    }
    if snapshots.is_empty() {
        return Err(invalid("snapshots", "list is empty"));
    }
    let mut s = snapshots.to_vec();
    s.sort_unstable();
    s.dedup();
    if let Some(&last) = s.last() {
        if last > steps {
            return Err(invalid(
                "snapshots",
                format!("time {last} exceeds the horizon {steps}"),
            ));
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{make_localized, position_distribution, CoinBlochState};
    use crate::rng::stream_rng;
    use num_complex::Complex64 as C64;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};

    fn close(a: C64, b: C64) -> bool {
        (a - b).norm() < 1e-15
    }

    #[test]
    fn coin_examples() {
        let mut s = make_localized(0, CoinBlochState::symmetric());
        let before = (s.up_at(0), s.down_at(0));
        s.apply_coin(0.0);
        assert_eq!((s.up_at(0), s.down_at(0)), before);

        let mut s = make_localized(0, CoinBlochState::NORTH);
        s.apply_coin(FRAC_PI_2);
        assert!(close(s.up_at(0), C64::new(0.0, 0.0)));
        assert!(close(s.down_at(0), C64::new(0.0, 1.0)));

        let mut s = make_localized(0, CoinBlochState::NORTH);
        s.apply_coin(FRAC_PI_4);
        assert!(close(s.up_at(0), C64::new(FRAC_1_SQRT_2, 0.0)));
        assert!(close(s.down_at(0), C64::new(0.0, FRAC_1_SQRT_2)));
        assert!((s.norm_sqr() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn shift_examples() {
        let mut s = make_localized(0, CoinBlochState::symmetric());
        s.apply_shift(0);
        assert_eq!(s.len(), 1);

        let mut s = make_localized(0, CoinBlochState::symmetric());
        s.apply_shift(1);
        assert!(s.up_at(1).norm() > 0.7 && s.up_at(0).norm() == 0.0);
        assert!(s.down_at(-1).norm() > 0.7 && s.down_at(0).norm() == 0.0);

        // Negative shift mirrors the positive one with the components swapped.
        let coin = CoinBlochState::new(1.0, 0.3).unwrap();
        let mut a = make_localized(0, coin);
        let mut b = make_localized(0, coin);
        a.apply_shift(3);
        b.apply_shift(-3);
        assert_eq!(a.up_at(3), b.up_at(-3));
        assert_eq!(a.down_at(-3), b.down_at(3));
    }

    #[test]
    fn standard_steps_from_north() {
        let coin = CoinParams::noiseless(FRAC_PI_4);
        let mut rng = stream_rng(0, 0);
        let mut s = make_localized(0, CoinBlochState::NORTH);
        step_standard(&mut s, coin, &mut rng);
        let p = position_distribution(&s);
        assert!((p.get(1) - 0.5).abs() < 1e-15 && (p.get(-1) - 0.5).abs() < 1e-15);

        step_standard(&mut s, coin, &mut rng);
        let p = position_distribution(&s);
        assert!((p.get(2) - 0.25).abs() < 1e-15);
        assert!((p.get(0) - 0.5).abs() < 1e-15);
        assert!((p.get(-2) - 0.25).abs() < 1e-15);
        assert_eq!(s.time(), 2);
    }

    #[test]
    fn identity_coin_is_a_right_mover() {
        let mut s = make_localized(0, CoinBlochState::NORTH);
        evolve_standard(&mut s, 0.0, 37);
        assert!((position_distribution(&s).get(37) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn elephant_step_reductions() {
        let coin = CoinBlochState::new(1.1, 0.4).unwrap();
        let mut a = make_localized(0, coin);
        let mut b = make_localized(0, coin);
        for _ in 0..5 {
            step_elephant(&mut a, 0.6, 1);
            step_standard(&mut b, CoinParams::noiseless(0.6), &mut stream_rng(1, 1));
        }
        for l in -6..=6 {
            assert!((a.up_at(l) - b.up_at(l)).norm() < 1e-15);
            assert!((a.down_at(l) - b.down_at(l)).norm() < 1e-15);
        }

        let mut s = make_localized(4, coin);
        step_elephant(&mut s, 0.6, 0);
        assert!((position_distribution(&s).get(4) - 1.0).abs() < 1e-15);

        let mut s = make_localized(0, CoinBlochState::NORTH);
        step_elephant(&mut s, FRAC_PI_4, 2);
        let p = position_distribution(&s);
        assert!((p.get(2) - 0.5).abs() < 1e-15 && (p.get(-2) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn unit_rule_consumes_no_randomness() {
        let mut rng = stream_rng(3, 0);
        let mut reference = stream_rng(3, 0);
        for t in 1..50 {
            assert_eq!(sample_step_size(StepSizeRule::Unit, t, &mut rng), 1);
        }
        let a: u64 = rng.random();
        let b: u64 = reference.random();
        assert_eq!(a, b);
    }

    #[test]
    fn interval_rule_at_t1() {
        let mut rng = stream_rng(11, 0);
        let mut counts = [0usize; 3];
        let n = 60_000;
        for _ in 0..n {
            let d = sample_step_size(StepSizeRule::Interval, 1, &mut rng);
            assert!((0..=2).contains(&d));
            counts[d as usize] += 1;
        }
        let sigma = (n as f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 / 3.0).abs() < 4.0 * sigma);
        }
    }

    #[test]
    fn interval_rule_chi_square_at_t3() {
        let mut rng = stream_rng(12, 0);
        let n = 100_000;
        let mut counts = [0usize; 7];
        for _ in 0..n {
            let d = sample_step_size(StepSizeRule::Interval, 3, &mut rng);
            assert!((-2..=4).contains(&d));
            counts[(d + 2) as usize] += 1;
        }
        let expected = n as f64 / 7.0;
        let sigma = (n as f64 * (1.0 / 7.0) * (6.0 / 7.0)).sqrt();
        let mut chi2 = 0.0;
        for c in counts {
            assert!((c as f64 - expected).abs() < 4.0 * sigma);
            chi2 += (c as f64 - expected).powi(2) / expected;
        }
        // 6 degrees of freedom; 99.9% quantile is 22.46.
        assert!(chi2 < 22.46, "chi2 = {chi2}");
    }

    #[test]
    fn coin_noise_moments() {
        let mut rng = stream_rng(5, 0);
        assert_eq!(sample_coin_noise(0.7, 0.0, &mut rng), 0.7);

        let (theta, eps, n) = (0.7, 0.1, 100_000);
        let draws: Vec<f64> = (0..n)
            .map(|_| sample_coin_noise(theta, eps, &mut rng))
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let target_var = eps * eps / 3.0;
        // Uniform on [-ε, ε]: fourth central moment ε⁴/5.
        let se_mean = (target_var / n as f64).sqrt();
        let se_var = ((eps.powi(4) / 5.0 - target_var * target_var) / n as f64).sqrt();
        assert!((mean - theta).abs() < 4.0 * se_mean);
        assert!((var - target_var).abs() < 4.0 * se_var);
        assert!(draws.iter().all(|x| (x - theta).abs() <= eps));
    }

    #[test]
    fn coin_params_validation() {
        assert!(CoinParams::new(0.3, -0.1).is_err());
        assert!(CoinParams::new(f64::NAN, 0.0).is_err());
        assert!(CoinParams::new(0.3, 0.1).is_ok());
    }

    #[test]
    fn norm_after_many_interval_steps() {
        let mut s = make_localized(0, CoinBlochState::symmetric());
        let mut rng = stream_rng(8, 0);
        let coin = CoinParams::new(FRAC_PI_4, 0.05).unwrap();
        drive(
            &mut s,
            coin,
            StepSizeRule::Interval,
            1000,
            &[],
            &mut rng,
            |_, _| {},
        );
        assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn standard_walk_parity_and_mirror_symmetry() {
        let mut s = make_localized(0, CoinBlochState::symmetric());
        for t in 1..=60i64 {
            step_elephant(&mut s, 0.9, 1);
            let p = position_distribution(&s);
            for (l, q) in p.sites() {
                if (l - t).rem_euclid(2) != 0 {
                    assert_eq!(q, 0.0);
                }
                assert!((q - p.get(-l)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn snapshot_validation() {
        assert!(normalize_snapshots(&[], 5).is_err());
        assert!(normalize_snapshots(&[6], 5).is_err());
        assert!(normalize_snapshots(&[1], 0).is_err());
        assert_eq!(
            normalize_snapshots(&[5, 0, 5, 2], 5).unwrap(),
            vec![0, 2, 5]
        );
    }
}

use serde::{Deserialize, Serialize};

use super::{drive, normalize_snapshots, CoinParams, StepSizeRule};
use crate::error::Result;
use crate::lattice::{
    position_distribution, reduced_coin_density, CoinDensity, PositionDistribution, WalkState,
};
use crate::rng::SeedInfo;

/// One realized trajectory: the sampled step sizes and the observables at
/// each snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub seed: SeedInfo,
    /// `Δ_1 … Δ_T`
    pub steps: Vec<i64>,
    pub snapshot_times: Vec<usize>,
    pub distributions: Vec<PositionDistribution>,
    pub coin_densities: Vec<CoinDensity>,
}

/// Evolves `init` for `steps` steps drawing randomness from `seed`'s stream.
pub fn run_trajectory(
    init: &WalkState,
    coin: CoinParams,
    rule: StepSizeRule,
    steps: usize,
    snapshots: &[usize],
    seed: SeedInfo,
) -> Result<TrajectoryRecord> {
    let snapshot_times = normalize_snapshots(snapshots, steps)?;
    let mut state = init.clone();
    let mut rng = seed.rng();
    let mut distributions = Vec::with_capacity(snapshot_times.len());
    let mut coin_densities = Vec::with_capacity(snapshot_times.len());
    let deltas = drive(
        &mut state,
        coin,
        rule,
        steps,
        &snapshot_times,
        &mut rng,
        |_, s| {
            distributions.push(position_distribution(s));
            coin_densities.push(reduced_coin_density(s));
        },
    );
    Ok(TrajectoryRecord {
        seed,
        steps: deltas,
        snapshot_times,
        distributions,
        coin_densities,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{make_localized, CoinBlochState};
    use crate::walk::{evolve_standard, sample_step_size};
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn unit_rule_matches_standard_walk() {
        let init = make_localized(0, CoinBlochState::symmetric());
        let rec = run_trajectory(
            &init,
            CoinParams::noiseless(FRAC_PI_4),
            StepSizeRule::Unit,
            40,
            &[10, 40],
            SeedInfo::new(99, 3),
        )
        .unwrap();
        assert!(rec.steps.iter().all(|&d| d == 1));
        let mut s = init.clone();
        evolve_standard(&mut s, FRAC_PI_4, 40);
        assert_eq!(rec.distributions[1], position_distribution(&s));
    }

    #[test]
    fn same_seed_same_record() {
        let init = make_localized(0, CoinBlochState::NORTH);
        let coin = CoinParams::new(0.7, 0.1).unwrap();
        let a = run_trajectory(
            &init,
            coin,
            StepSizeRule::Interval,
            30,
            &[0, 5, 30],
            SeedInfo::new(1, 2),
        )
        .unwrap();
        let b = run_trajectory(
            &init,
            coin,
            StepSizeRule::Interval,
            30,
            &[0, 5, 30],
            SeedInfo::new(1, 2),
        )
        .unwrap();
        assert_eq!(a, b);
        for d in &a.distributions {
            assert!((d.total() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn recorded_steps_replay() {
        let seed = SeedInfo::new(2024, 7);
        let init = make_localized(0, CoinBlochState::symmetric());
        let rec = run_trajectory(
            &init,
            CoinParams::noiseless(FRAC_PI_4),
            StepSizeRule::Interval,
            2,
            &[2],
            seed,
        )
        .unwrap();
        // Independent replay of the sampler on the same stream.
        let mut rng = seed.rng();
        let d1 = sample_step_size(StepSizeRule::Interval, 1, &mut rng);
        let d2 = sample_step_size(StepSizeRule::Interval, 2, &mut rng);
        assert_eq!(rec.steps, vec![d1, d2]);
        assert_eq!(rec.steps.len(), 2);
    }

    #[test]
    fn rejects_empty_snapshots() {
        let init = make_localized(0, CoinBlochState::NORTH);
        let r = run_trajectory(
            &init,
            CoinParams::noiseless(0.3),
            StepSizeRule::Unit,
            5,
            &[],
            SeedInfo::new(0, 0),
        );
        assert!(r.is_err());
    }
}

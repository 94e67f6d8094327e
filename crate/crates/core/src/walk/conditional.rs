//! Per-step displacement statistics under projective position measurement.
//!
//! After every unit step the position is measured and the state collapses
//! onto the observed site, so each displacement `Δ̂_k = X_k - X_{k-1}` is a
//! classical ±1 random variable and joint/conditional frequencies over short
//! histories can be tabulated.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{step_standard, CoinParams};
use crate::error::{invalid, Result};
use crate::lattice::{make_localized, position_distribution, CoinBlochState};
use crate::rng::stream_rng;

/// Largest history length the collapse tables support.
pub const MAX_DEPTH: usize = 3;

/// A probability estimate with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub p: f64,
    pub se: f64,
    /// Number of trials behind the estimate.
    pub trials: u64,
}

impl Estimate {
    fn binomial(hits: u64, trials: u64) -> Self {
        if trials == 0 {
            return Self {
                p: f64::NAN,
                se: f64::NAN,
                trials,
            };
        }
        let p = hits as f64 / trials as f64;
        Self {
            p,
            se: (p * (1.0 - p) / trials as f64).sqrt(),
            trials,
        }
    }
}

/// Empirical frequencies of every displacement history `(Δ̂_1, …, Δ̂_t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalTable {
    pub depth: usize,
    pub samples: u64,
    /// Indexed by history; bit `k` set means `Δ̂_{k+1} = -1`.
    counts: Vec<u64>,
}

fn encode(history: &[i64]) -> usize {
    history
        .iter()
        .enumerate()
        .map(|(k, &d)| usize::from(d < 0) << k)
        .sum()
}

fn decode(code: usize, depth: usize) -> Vec<i64> {
    (0..depth)
        .map(|k| if code >> k & 1 == 1 { -1 } else { 1 })
        .collect()
}

impl ConditionalTable {
    pub fn histories(&self) -> impl Iterator<Item = (Vec<i64>, u64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .map(|(code, &c)| (decode(code, self.depth), c))
    }

    /// Number of samples whose history starts with `prefix`.
    pub fn prefix_count(&self, prefix: &[i64]) -> u64 {
        assert!(prefix.len() <= self.depth);
        let mask = (1usize << prefix.len()) - 1;
        let key = encode(prefix);
        self.counts
            .iter()
            .enumerate()
            .filter(|(code, _)| code & mask == key)
            .map(|(_, &c)| c)
            .sum()
    }

    /// `P(Δ̂_1 … Δ̂_k = prefix)`
    pub fn joint(&self, prefix: &[i64]) -> Estimate {
        Estimate::binomial(self.prefix_count(prefix), self.samples)
    }

    /// `P(Δ̂_{k+1} = next | Δ̂_1 … Δ̂_k = prefix)`
    pub fn conditional(&self, prefix: &[i64], next: i64) -> Estimate {
        let mut extended = prefix.to_vec();
        extended.push(next);
        Estimate::binomial(self.prefix_count(&extended), self.prefix_count(prefix))
    }
}

/// Tabulates displacement histories of length `depth` over `samples`
/// independent runs of the measured standard walk.
pub fn conditional_step_distribution(
    coin: CoinParams,
    init: CoinBlochState,
    depth: usize,
    samples: u64,
    seed: u64,
) -> Result<ConditionalTable> {
    if !(2..=MAX_DEPTH).contains(&depth) {
        return Err(invalid(
            "depth",
            format!("{depth} is outside the supported range 2..={MAX_DEPTH}"),
        ));
    }
    if samples == 0 {
        return Err(invalid("samples", "must be at least 1"));
    }
    let mut counts = vec![0u64; 1 << depth];
    let mut rng = stream_rng(seed, 0);
    let mut history = Vec::with_capacity(depth);
    for _ in 0..samples {
        let mut state = make_localized(0, init);
        let mut position = 0i64;
        history.clear();
        for _ in 0..depth {
            step_standard(&mut state, coin, &mut rng);
            let dist = position_distribution(&state);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut site = dist.window_lo + dist.probs.len() as i64 - 1;
            for (l, p) in dist.sites() {
                acc += p;
                if u < acc {
                    site = l;
                    break;
                }
            }
            state.collapse_at(site);
            history.push(site - position);
            position = site;
        }
        counts[encode(&history)] += 1;
    }
    Ok(ConditionalTable {
        depth,
        samples,
        counts,
    })
}

/// Splits the `(t-1)!` orderings of `Δ_2 … Δ_t` (each preceded by `Δ_1`)
/// by the parity of their number of contrarian steps, i.e. sign changes
/// between consecutive entries. Returns `(even, odd)`.
pub fn contrarian_parity_counts(history: &[i64]) -> Result<(u64, u64)> {
    if history.is_empty() {
        return Err(invalid("history", "must be nonempty"));
    }
    if history.len() > 10 {
        return Err(invalid("history", "enumeration is limited to 10 steps"));
    }
    let first = history[0];
    let mut rest: Vec<i64> = history[1..].to_vec();
    let (mut even, mut odd) = (0u64, 0u64);
    permute(&mut rest, 0, &mut |order| {
        let mut prev = first;
        let mut flips = 0;
        for &d in order {
            if d.signum() != prev.signum() {
                flips += 1;
            }
            prev = d;
        }
        if flips % 2 == 0 {
            even += 1;
        } else {
            odd += 1;
        }
    });
    Ok((even, odd))
}

fn permute(items: &mut Vec<i64>, k: usize, visit: &mut impl FnMut(&[i64])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, visit);
        items.swap(k, i);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn first_step_bias_at_pi_over_4() {
        let table = conditional_step_distribution(
            CoinParams::noiseless(FRAC_PI_4),
            CoinBlochState::NORTH,
            2,
            40_000,
            1,
        )
        .unwrap();
        let e = table.joint(&[1]);
        assert!((e.p - 0.5).abs() < 3.0 * 0.5 / (40_000f64).sqrt());
        let c = table.conditional(&[1], 1);
        assert!((c.p - 0.5).abs() < 3.0 * c.se.max(1e-3));
    }

    #[test]
    fn identity_coin_never_flips() {
        let table = conditional_step_distribution(
            CoinParams::noiseless(0.0),
            CoinBlochState::NORTH,
            2,
            2_000,
            2,
        )
        .unwrap();
        assert_eq!(table.conditional(&[1], 1).p, 1.0);
        assert_eq!(table.joint(&[1, 1]).p, 1.0);
    }

    #[test]
    fn conditionals_sum_to_one() {
        let table = conditional_step_distribution(
            CoinParams::noiseless(0.5),
            CoinBlochState::new(1.0, 0.7).unwrap(),
            3,
            5_000,
            3,
        )
        .unwrap();
        for prefix in [
            vec![1],
            vec![-1],
            vec![1, 1],
            vec![1, -1],
            vec![-1, 1],
            vec![-1, -1],
        ] {
            let s = table.conditional(&prefix, 1).p + table.conditional(&prefix, -1).p;
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert_eq!(table.histories().map(|(_, c)| c).sum::<u64>(), 5_000);
    }

    #[test]
    fn rejects_deep_histories() {
        let coin = CoinParams::noiseless(0.5);
        assert!(conditional_step_distribution(coin, CoinBlochState::NORTH, 4, 10, 0).is_err());
        assert!(conditional_step_distribution(coin, CoinBlochState::NORTH, 1, 10, 0).is_err());
    }

    #[test]
    fn parity_counts_sum_to_factorial() {
        let h = [1, -1, 1, 1, -1];
        let (a, b) = contrarian_parity_counts(&h).unwrap();
        assert_eq!(a + b, 24);
        let (a, b) = contrarian_parity_counts(&[1, 1, 1]).unwrap();
        assert_eq!((a, b), (2, 0));
        let (a, b) = contrarian_parity_counts(&[1, -1]).unwrap();
        assert_eq!((a, b), (0, 1));
    }
}

//! Classical elephant random walk.
//!
//! The first step is `+1` with probability `q`. Every later step picks a past
//! step uniformly at random and repeats it with probability `p` or reverses it
//! with probability `1 - p`.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::{ordered_chunks, stream_rng, SeedInfo};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErwParams {
    /// Memory parameter: probability of repeating the recalled step.
    pub p: f64,
    /// Probability that the first step goes right.
    pub q: f64,
    pub steps: usize,
    pub trajectories: usize,
}

impl ErwParams {
    pub fn new(p: f64, q: f64, steps: usize, trajectories: usize) -> Result<Self> {
        let params = Self {
            p,
            q,
            steps,
            trajectories,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(invalid("p", format!("{} is outside [0, 1]", self.p)));
        }
        if !(0.0..=1.0).contains(&self.q) {
            return Err(invalid("q", format!("{} is outside [0, 1]", self.q)));
        }
        if self.steps == 0 {
            return Err(invalid("steps", "must be at least 1"));
        }
        if self.trajectories == 0 {
            return Err(invalid("trajectories", "must be at least 1"));
        }
        Ok(())
    }
}

fn bernoulli<R: Rng + ?Sized>(rng: &mut R, prob: f64) -> bool {
    // `prob == 1` must always succeed and `prob == 0` never.
    rng.random::<f64>() < prob
}

/// Draws the next step given the steps taken so far (nonempty).
fn next_step<R: Rng + ?Sized>(past: &[i8], p: f64, rng: &mut R) -> i8 {
    let recalled = past[rng.random_range(0..past.len())];
    if bernoulli(rng, p) {
        recalled
    } else {
        -recalled
    }
}

/// Steps `Δ_1 … Δ_T` of one walk.
fn erw_steps<R: Rng + ?Sized>(params: &ErwParams, rng: &mut R, steps: &mut Vec<i8>) {
    steps.clear();
    steps.push(if bernoulli(rng, params.q) { 1 } else { -1 });
    for _ in 1..params.steps {
        let d = next_step(steps, params.p, rng);
        steps.push(d);
    }
}

/// Positions `X_0 = 0, X_1, …, X_T` of one walk.
pub fn run_erw_trajectory(params: &ErwParams, seed: SeedInfo) -> Result<Vec<i64>> {
    params.validate()?;
    let mut rng = seed.rng();
    let mut steps = Vec::with_capacity(params.steps);
    erw_steps(params, &mut rng, &mut steps);
    let mut x = Vec::with_capacity(params.steps + 1);
    x.push(0i64);
    let mut pos = 0i64;
    for &d in &steps {
        pos += d as i64;
        x.push(pos);
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErwMomentRow {
    pub t: usize,
    pub mean: f64,
    pub var: f64,
    pub se_mean: f64,
    pub se_var: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErwMoments {
    pub params: ErwParams,
    pub master_seed: u64,
    /// One row per `t = 1 … T`.
    pub rows: Vec<ErwMomentRow>,
}

impl ErwMoments {
    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t as f64).collect()
    }

    pub fn means(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.mean).collect()
    }

    pub fn variances(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.var).collect()
    }

    /// `t,mean,var,se_mean,se_var`
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "mean", "var", "se_mean", "se_var"])?;
        for r in &self.rows {
            w.write_record([
                r.t.to_string(),
                r.mean.to_string(),
                r.var.to_string(),
                r.se_mean.to_string(),
                r.se_var.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Power sums `Σ X_t^k`, `k = 1..4`, kept exact so the reduction is
/// independent of summation order.
#[derive(Clone)]
struct PowerSums(Vec<[i128; 4]>);

impl PowerSums {
    fn new(steps: usize) -> Self {
        Self(vec![[0; 4]; steps])
    }

    fn merge(&mut self, other: &PowerSums) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            for k in 0..4 {
                a[k] += b[k];
            }
        }
    }
}

/// Mean and variance of `X_t` over `params.trajectories` walks, walk `i`
/// using stream `i` of `master_seed`.
pub fn erw_ensemble_moments(params: &ErwParams, master_seed: u64) -> Result<ErwMoments> {
    params.validate()?;
    let mut total = PowerSums::new(params.steps);
    ordered_chunks(
        params.trajectories,
        |range| {
            let mut sums = PowerSums::new(params.steps);
            let mut steps = Vec::with_capacity(params.steps);
            for i in range {
                let mut rng = stream_rng(master_seed, i as u64);
                erw_steps(params, &mut rng, &mut steps);
                let mut x: i128 = 0;
                for (slot, &d) in sums.0.iter_mut().zip(&steps) {
                    x += d as i128;
                    let x2 = x * x;
                    slot[0] += x;
                    slot[1] += x2;
                    slot[2] += x2 * x;
                    slot[3] += x2 * x2;
                }
            }
            sums
        },
        |s| total.merge(&s),
    );
    let n = params.trajectories as f64;
    let rows = total
        .0
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let m1 = s[0] as f64 / n;
            let m2 = s[1] as f64 / n;
            let m3 = s[2] as f64 / n;
            let m4 = s[3] as f64 / n;
            let var = (m2 - m1 * m1).max(0.0);
            let mu4 = m4 - 4.0 * m1 * m3 + 6.0 * m1 * m1 * m2 - 3.0 * m1.powi(4);
            ErwMomentRow {
                t: i + 1,
                mean: m1,
                var,
                se_mean: (var / n).sqrt(),
                se_var: ((mu4 - var * var).max(0.0) / n).sqrt(),
            }
        })
        .collect();
    Ok(ErwMoments {
        params: *params,
        master_seed,
        rows,
    })
}

fn check_history(history: &[i64]) -> Result<()> {
    if history.is_empty() {
        return Err(invalid("history", "must be nonempty"));
    }
    if history.iter().any(|&d| d != 1 && d != -1) {
        return Err(invalid("history", "entries must be +1 or -1"));
    }
    Ok(())
}

/// `P(Δ_{t+1} = ell | Δ_1 … Δ_t) = Σ_j [1 - (1 - 2p) ell Δ_j] / (2t)`
pub fn erw_conditional_probability(p: f64, history: &[i64], ell: i64) -> Result<f64> {
    check_history(history)?;
    if ell != 1 && ell != -1 {
        return Err(invalid("ell", "must be +1 or -1"));
    }
    let t = history.len() as f64;
    let s: f64 = history
        .iter()
        .map(|&d| 1.0 - (1.0 - 2.0 * p) * (ell * d) as f64)
        .sum();
    Ok(s / (2.0 * t))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErwConditionalCheck {
    pub analytic: f64,
    pub empirical: f64,
    pub samples: usize,
    /// `(empirical - analytic) / sqrt(analytic (1 - analytic) / samples)`
    pub z: f64,
}

/// Continues `history` by one step `samples` times and compares the
/// frequency of `ell` with the closed form.
pub fn erw_conditional_check(
    p: f64,
    history: &[i64],
    ell: i64,
    samples: usize,
    seed: u64,
) -> Result<ErwConditionalCheck> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid("p", format!("{p} is outside [0, 1]")));
    }
    if samples == 0 {
        return Err(invalid("samples", "must be at least 1"));
    }
    let analytic = erw_conditional_probability(p, history, ell)?;
    let past: Vec<i8> = history.iter().map(|&d| d as i8).collect();
    let mut hits = 0usize;
    ordered_chunks(
        samples,
        |range| {
            let mut h = 0usize;
            for i in range {
                let mut rng = stream_rng(seed, i as u64);
                if next_step(&past, p, &mut rng) as i64 == ell {
                    h += 1;
                }
            }
            h
        },
        |h| hits += h,
    );
    let n = samples as f64;
    let empirical = hits as f64 / n;
    let se = (analytic * (1.0 - analytic) / n).sqrt();
    let z = if se > 0.0 {
        (empirical - analytic) / se
    } else if empirical == analytic {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(ErwConditionalCheck {
        analytic,
        empirical,
        samples,
        z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_persistence() {
        let params = ErwParams::new(1.0, 1.0, 50, 1).unwrap();
        let x = run_erw_trajectory(&params, SeedInfo::new(3, 0)).unwrap();
        assert_eq!(x, (0..=50).collect::<Vec<i64>>());
    }

    #[test]
    fn forced_flip_returns_to_origin() {
        let params = ErwParams::new(0.0, 1.0, 10, 1).unwrap();
        for s in 0..20 {
            let x = run_erw_trajectory(&params, SeedInfo::new(s, s)).unwrap();
            assert_eq!(x[1], 1);
            assert_eq!(x[2], 0);
            assert!(x.windows(2).all(|w| (w[1] - w[0]).abs() == 1));
        }
    }

    #[test]
    fn brownian_at_one_half() {
        let params = ErwParams::new(0.5, 0.5, 64, 100_000).unwrap();
        let m = erw_ensemble_moments(&params, 11).unwrap();
        for r in &m.rows {
            assert!((r.var - r.t as f64).abs() < 4.0 * r.se_var, "{r:?}");
            assert!(r.mean.abs() < 4.0 * r.se_mean.max(1e-9), "{r:?}");
        }
    }

    #[test]
    fn uncorrelated_increments_at_one_half() {
        // Lag-k autocorrelation of increments across walks.
        let params = ErwParams::new(0.5, 0.5, 16, 1).unwrap();
        let n = 40_000;
        let mut sums = [0.0f64; 15];
        for i in 0..n {
            let x = run_erw_trajectory(&params, SeedInfo::new(8, i)).unwrap();
            let d: Vec<f64> = x.windows(2).map(|w| (w[1] - w[0]) as f64).collect();
            for (lag, s) in sums.iter_mut().enumerate() {
                *s += d[0] * d[lag + 1];
            }
        }
        let se = 1.0 / (n as f64).sqrt();
        for s in sums {
            assert!((s / n as f64).abs() < 4.0 * se);
        }
    }

    #[test]
    fn closed_form_examples() {
        assert!((erw_conditional_probability(0.3, &[1], 1).unwrap() - 0.3).abs() < 1e-15);
        for p in [0.0, 0.2, 0.75, 1.0] {
            assert!((erw_conditional_probability(p, &[1, -1], 1).unwrap() - 0.5).abs() < 1e-15);
        }
        let v = erw_conditional_probability(0.75, &[1, 1, -1], 1).unwrap();
        assert!((v - 7.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn empirical_conditional_agrees() {
        let c = erw_conditional_check(0.75, &[1, 1, -1], 1, 100_000, 9).unwrap();
        assert!(c.z.abs() < 4.0, "{c:?}");
    }

    #[test]
    fn moments_are_deterministic_and_thread_independent() {
        let params = ErwParams::new(0.8, 0.7, 40, 500).unwrap();
        let a = erw_ensemble_moments(&params, 5).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap();
        let b = pool.install(|| erw_ensemble_moments(&params, 5).unwrap());
        assert_eq!(a, b);
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("t,mean,var,se_mean,se_var\n"));
    }

    #[test]
    fn validation() {
        assert!(ErwParams::new(1.2, 0.5, 10, 10).is_err());
        assert!(ErwParams::new(0.5, -0.1, 10, 10).is_err());
        assert!(ErwParams::new(0.5, 0.5, 0, 10).is_err());
        assert!(erw_conditional_probability(0.5, &[], 1).is_err());
        assert!(erw_conditional_probability(0.5, &[2], 1).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn conditional_sums_to_one(p in 0.0f64..=1.0, h in proptest::collection::vec(prop_oneof![Just(1i64), Just(-1i64)], 1..30)) {
                let s = erw_conditional_probability(p, &h, 1).unwrap() + erw_conditional_probability(p, &h, -1).unwrap();
                prop_assert!((s - 1.0).abs() < 1e-14);
            }
        }
    }
}

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{drive, normalize_snapshots, CoinParams, StepSizeRule};
use crate::analysis::moments;
use crate::error::{invalid, Result};
use crate::lattice::{reduced_coin_density, CoinDensity, PositionDistribution, WalkState};
use crate::rng::{ordered_chunks, stream_rng};

/// Moments of the ensemble-mean distribution at one snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub t: usize,
    pub mean: f64,
    pub var: f64,
    pub kurtosis: f64,
    pub se_mean: f64,
    pub se_var: f64,
}

/// Arithmetic mean over `trajectories` independent realizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub snapshot_times: Vec<usize>,
    pub distributions: Vec<PositionDistribution>,
    pub coin_densities: Vec<CoinDensity>,
    pub moments: Vec<MomentRow>,
    pub trajectories: usize,
}

impl EnsembleResult {
    pub fn distribution_at(&self, t: usize) -> Option<&PositionDistribution> {
        self.snapshot_times
            .iter()
            .position(|&s| s == t)
            .and_then(|i| self.distributions.get(i))
    }

    /// `t,mean,var,kurtosis,se_mean,se_var`
    pub fn write_moments_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "mean", "var", "kurtosis", "se_mean", "se_var"])?;
        for r in &self.moments {
            w.write_record([
                r.t.to_string(),
                r.mean.to_string(),
                r.var.to_string(),
                r.kurtosis.to_string(),
                r.se_mean.to_string(),
                r.se_var.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Running sum of probability vectors on a growing window.
#[derive(Debug, Clone, Default)]
struct ProbSum {
    lo: i64,
    vals: Vec<f64>,
}

impl ProbSum {
    fn reserve(&mut self, lo: i64, len: usize) {
        if self.vals.is_empty() {
            self.lo = lo;
            self.vals = vec![0.0; len];
            return;
        }
        let hi = (lo + len as i64).max(self.lo + self.vals.len() as i64);
        let new_lo = lo.min(self.lo);
        if new_lo == self.lo && hi == self.lo + self.vals.len() as i64 {
            return;
        }
        let mut next = vec![0.0; (hi - new_lo) as usize];
        let off = (self.lo - new_lo) as usize;
        next[off..off + self.vals.len()].copy_from_slice(&self.vals);
        self.lo = new_lo;
        self.vals = next;
    }

    fn add_state(&mut self, state: &WalkState) {
        self.reserve(state.window_lo(), state.len());
        let off = (state.window_lo() - self.lo) as usize;
        let dst = &mut self.vals[off..off + state.len()];
        for ((p, u), d) in dst.iter_mut().zip(state.amp_up()).zip(state.amp_down()) {
            *p += u.norm_sqr() + d.norm_sqr();
        }
    }

    fn merge(&mut self, other: &ProbSum) {
        if other.vals.is_empty() {
            return;
        }
        self.reserve(other.lo, other.vals.len());
        let off = (other.lo - self.lo) as usize;
        for (a, b) in self.vals[off..].iter_mut().zip(&other.vals) {
            *a += b;
        }
    }
}

struct Accum {
    dists: Vec<ProbSum>,
    coins: Vec<CoinDensity>,
    /// Per snapshot, per trajectory (in index order): first and second raw
    /// moments of that trajectory's distribution.
    raw: Vec<Vec<[f64; 2]>>,
}

impl Accum {
    fn new(snapshots: usize) -> Self {
        Self {
            dists: vec![ProbSum::default(); snapshots],
            coins: vec![CoinDensity::zero(); snapshots],
            raw: vec![Vec::new(); snapshots],
        }
    }

    fn merge(&mut self, other: Accum) {
        for (a, b) in self.dists.iter_mut().zip(&other.dists) {
            a.merge(b);
        }
        for (a, b) in self.coins.iter_mut().zip(&other.coins) {
            a.add_assign(b);
        }
        for (a, b) in self.raw.iter_mut().zip(other.raw) {
            a.extend(b);
        }
    }
}

fn raw_moments(state: &WalkState) -> [f64; 2] {
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    let lo = state.window_lo() as f64;
    for (i, (u, d)) in state.amp_up().iter().zip(state.amp_down()).enumerate() {
        let p = u.norm_sqr() + d.norm_sqr();
        let l = lo + i as f64;
        m1 += p * l;
        m2 += p * l * l;
    }
    [m1, m2]
}

/// Ensemble over `n` trajectories; trajectory `i` uses stream `i` of
/// `master_seed`. With `keep_distributions == false` only coin densities and
/// per-trajectory moments are accumulated.
pub(crate) fn ensemble_impl(
    init: &WalkState,
    coin: CoinParams,
    rule: StepSizeRule,
    steps: usize,
    snapshots: &[usize],
    n: usize,
    master_seed: u64,
    keep_distributions: bool,
) -> Result<EnsembleResult> {
    if n == 0 {
        return Err(invalid("trajectories", "must be at least 1"));
    }
    let snaps = normalize_snapshots(snapshots, steps)?;
    let k = snaps.len();
    let mut total = Accum::new(k);
    ordered_chunks(
        n,
        |range| {
            let mut acc = Accum::new(k);
            for i in range {
                let mut state = init.clone();
                let mut rng = stream_rng(master_seed, i as u64);
                let mut slot = 0;
                drive(&mut state, coin, rule, steps, &snaps, &mut rng, |_, s| {
                    if keep_distributions {
                        acc.dists[slot].add_state(s);
                    }
                    acc.coins[slot].add_assign(&reduced_coin_density(s));
                    acc.raw[slot].push(raw_moments(s));
                    slot += 1;
                });
            }
            acc
        },
        |acc| total.merge(acc),
    );

    let inv_n = 1.0 / n as f64;
    let mut distributions = Vec::new();
    let mut moment_rows = Vec::with_capacity(k);
    for (slot, &t) in snaps.iter().enumerate() {
        let raw = &total.raw[slot];
        let (mean, var, se_mean, se_var) = moment_statistics(raw);
        let kurtosis = if keep_distributions {
            let dist = PositionDistribution {
                window_lo: total.dists[slot].lo,
                probs: total.dists[slot].vals.iter().map(|p| p * inv_n).collect(),
            };
            let m = moments(&dist);
            distributions.push(dist);
            m.excess_kurtosis
        } else {
            f64::NAN
        };
        moment_rows.push(MomentRow {
            t,
            mean,
            var,
            kurtosis,
            se_mean,
            se_var,
        });
    }
    let coin_densities = total.coins.iter().map(|c| c.scaled(inv_n)).collect();
    Ok(EnsembleResult {
        snapshot_times: snaps,
        distributions,
        coin_densities,
        moments: moment_rows,
        trajectories: n,
    })
}

/// Mean and variance of the mixture distribution with delta-method standard
/// errors from the per-trajectory raw moments.
fn moment_statistics(raw: &[[f64; 2]]) -> (f64, f64, f64, f64) {
    let n = raw.len() as f64;
    let m1 = raw.iter().map(|r| r[0]).sum::<f64>() / n;
    let m2 = raw.iter().map(|r| r[1]).sum::<f64>() / n;
    let var = (m2 - m1 * m1).max(0.0);
    if raw.len() < 2 {
        return (m1, var, 0.0, 0.0);
    }
    let (mut c11, mut c12, mut c22) = (0.0, 0.0, 0.0);
    for r in raw {
        let (a, b) = (r[0] - m1, r[1] - m2);
        c11 += a * a;
        c12 += a * b;
        c22 += b * b;
    }
    let dof = n - 1.0;
    let (c11, c12, c22) = (c11 / dof, c12 / dof, c22 / dof);
    let se_mean = (c11 / n).sqrt();
    // gradient of m2 - m1² is (-2 m1, 1)
    let v = 4.0 * m1 * m1 * c11 - 4.0 * m1 * c12 + c22;
    let se_var = (v.max(0.0) / n).sqrt();
    (m1, var, se_mean, se_var)
}

/// Monte Carlo average of `P_t(l)` and `ρ̂ᶜ_t` over `n` trajectories.
pub fn run_ensemble(
    init: &WalkState,
    coin: CoinParams,
    rule: StepSizeRule,
    steps: usize,
    snapshots: &[usize],
    n: usize,
    master_seed: u64,
) -> Result<EnsembleResult> {
    ensemble_impl(init, coin, rule, steps, snapshots, n, master_seed, true)
}

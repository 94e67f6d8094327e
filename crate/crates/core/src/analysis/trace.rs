use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lattice::{make_gaussian_packet, CoinBlochState, CoinDensity, GaussianPacketSpec};
use crate::spectral::evolve_two_point_channel;
use crate::walk::ensemble::ensemble_impl;
use crate::walk::{CoinParams, StepSizeRule};

/// `½‖a − b‖₁`, computed as half the Euclidean distance of the Bloch vectors.
pub fn trace_distance(a: &CoinDensity, b: &CoinDensity) -> f64 {
    let (ra, rb) = (a.bloch(), b.bloch());
    let d2: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - y) * (x - y)).sum();
    0.5 * d2.sqrt()
}

/// Increments at or below this size are treated as rounding, not growth.
pub const GROWTH_TOLERANCE: f64 = 1e-12;

/// Trace distance over time together with the memory witness built from its
/// increments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceDistanceSeries {
    pub times: Vec<usize>,
    pub distances: Vec<f64>,
    /// `v_t = D_{t+1} - D_t`; one shorter than `distances`.
    pub velocities: Vec<f64>,
    /// `Σ max(v_t, 0)` over increments above [`GROWTH_TOLERANCE`].
    pub blp_sum: f64,
    /// Number of increments above [`GROWTH_TOLERANCE`].
    pub positive_events: usize,
}

impl TraceDistanceSeries {
    pub fn from_distances(times: Vec<usize>, distances: Vec<f64>) -> Self {
        let velocities: Vec<f64> = distances.windows(2).map(|w| w[1] - w[0]).collect();
        let grows = |v: &&f64| **v > GROWTH_TOLERANCE;
        let blp_sum = velocities.iter().filter(grows).fold(0.0, |acc, v| acc + v);
        let positive_events = velocities.iter().filter(grows).count();
        Self {
            times,
            distances,
            velocities,
            blp_sum,
            positive_events,
        }
    }

    /// Times at which the distance grew over the following step.
    pub fn growth_times(&self) -> impl Iterator<Item = usize> + '_ {
        self.times
            .iter()
            .zip(&self.velocities)
            .filter(|(_, &v)| v > GROWTH_TOLERANCE)
            .map(|(&t, _)| t)
    }

    pub fn distance_at(&self, t: usize) -> Option<f64> {
        self.times
            .iter()
            .position(|&s| s == t)
            .map(|i| self.distances[i])
    }

    /// `t,D,v`; the last row has no velocity.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "D", "v"])?;
        for (i, (t, d)) in self.times.iter().zip(&self.distances).enumerate() {
            let v = self
                .velocities
                .get(i)
                .map(|v| v.to_string())
                .unwrap_or_default();
            w.write_record([t.to_string(), d.to_string(), v])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Two ensembles that differ only in their initial coin state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceExperiment {
    pub coin_a: CoinBlochState,
    pub coin_b: CoinBlochState,
    pub packet: GaussianPacketSpec,
    /// Packet half-width in position standard deviations.
    pub truncation: f64,
    pub coin: CoinParams,
    pub rule: StepSizeRule,
    pub steps: usize,
    pub trajectories: usize,
    pub seed: u64,
}

/// Runs both ensembles with the same master seed, so trajectory `i` of each
/// sees the same step sizes and coin noise, and returns the trace distance
/// between their mean coin densities at every step `0..=steps`.
pub fn trace_distance_experiment(cfg: &TraceExperiment) -> Result<TraceDistanceSeries> {
    if cfg.trajectories == 0 {
        return Err(invalid("trajectories", "must be at least 1"));
    }
    let snaps: Vec<usize> = (0..=cfg.steps).collect();
    let run = |bloch: CoinBlochState| {
        let init = make_gaussian_packet(cfg.packet, bloch, cfg.truncation)?;
        ensemble_impl(
            &init,
            cfg.coin,
            cfg.rule,
            cfg.steps,
            &snaps,
            cfg.trajectories,
            cfg.seed,
            false,
        )
    };
    let a = run(cfg.coin_a)?;
    let b = run(cfg.coin_b)?;
    let distances = a
        .coin_densities
        .iter()
        .zip(&b.coin_densities)
        .map(|(x, y)| trace_distance(x, y))
        .collect();
    Ok(TraceDistanceSeries::from_distances(snaps, distances))
}

/// The same comparison on the exact averaged channel (the limit of
/// infinitely many trajectories) over a periodic lattice of `m` sites.
/// `trajectories` and `seed` are not used.
pub fn trace_distance_channel(cfg: &TraceExperiment, m: usize) -> Result<TraceDistanceSeries> {
    let run = |bloch: CoinBlochState| {
        let init = make_gaussian_packet(cfg.packet, bloch, cfg.truncation)?;
        evolve_two_point_channel(m, cfg.steps, cfg.coin, &init, cfg.rule)
    };
    let (a, b) = (run(cfg.coin_a)?, run(cfg.coin_b)?);
    let distances = a
        .coin_densities
        .iter()
        .zip(&b.coin_densities)
        .map(|(x, y)| trace_distance(x, y))
        .collect();
    Ok(TraceDistanceSeries::from_distances(a.times, distances))
}

use serde::{Deserialize, Serialize};

use super::moments;
use crate::error::{invalid, Result};
use crate::lattice::PositionDistribution;

/// Mass allowed on the minority parity class before a distribution is
/// treated as living on both classes.
const PARITY_LEAK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianityReport {
    pub excess_kurtosis: f64,
    /// `max_l |P(l) - G(l)|` against the moment-matched lattice Gaussian.
    pub sup_norm: f64,
    /// The distribution occupies a single parity class and was compared on
    /// it with doubled Gaussian weights.
    pub single_parity: bool,
}

/// Compares `dist` with the Gaussian of identical mean and variance.
pub fn gaussianity_check(dist: &PositionDistribution) -> Result<GaussianityReport> {
    let m = moments(dist);
    if !(m.variance > 0.0) {
        return Err(invalid("dist", "variance must be positive"));
    }
    let mut parity_mass = [0.0; 2];
    for (l, p) in dist.sites() {
        parity_mass[l.rem_euclid(2) as usize] += p;
    }
    let occupied = if parity_mass[0] <= PARITY_LEAK {
        Some(1)
    } else if parity_mass[1] <= PARITY_LEAK {
        Some(0)
    } else {
        None
    };
    let weight = if occupied.is_some() { 2.0 } else { 1.0 };
    let norm = weight / (2.0 * std::f64::consts::PI * m.variance).sqrt();
    let gauss = |l: i64| norm * (-(l as f64 - m.mean).powi(2) / (2.0 * m.variance)).exp();

    // Scan well past the window so Gaussian mass outside it is counted too.
    let reach = (10.0 * m.variance.sqrt()).ceil() as i64;
    let lo = dist.window_lo.min(m.mean.floor() as i64 - reach);
    let hi = (dist.window_lo + dist.probs.len() as i64).max(m.mean.ceil() as i64 + reach);
    let mut sup: f64 = 0.0;
    for l in lo..=hi {
        if occupied.is_some_and(|par| l.rem_euclid(2) as usize != par) {
            continue;
        }
        sup = sup.max((dist.get(l) - gauss(l)).abs());
    }
    Ok(GaussianityReport {
        excess_kurtosis: m.excess_kurtosis,
        sup_norm: sup,
        single_parity: occupied.is_some(),
    })
}

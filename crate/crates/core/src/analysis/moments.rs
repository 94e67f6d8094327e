use serde::{Deserialize, Serialize};

use crate::lattice::PositionDistribution;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    /// `μ₄/σ⁴ - 3`; NaN for a single-site distribution.
    pub excess_kurtosis: f64,
}

/// Discrete moments about the mean.
pub fn moments(dist: &PositionDistribution) -> Moments {
    let total = dist.total();
    let mean = dist.sites().map(|(l, p)| p * l as f64).sum::<f64>() / total;
    let (mut m2, mut m4) = (0.0, 0.0);
    for (l, p) in dist.sites() {
        let d2 = (l as f64 - mean).powi(2);
        m2 += p * d2;
        m4 += p * d2 * d2;
    }
    m2 /= total;
    m4 /= total;
    let excess_kurtosis = if m2 > 0.0 {
        m4 / (m2 * m2) - 3.0
    } else {
        f64::NAN
    };
    Moments {
        mean,
        variance: m2,
        excess_kurtosis,
    }
}

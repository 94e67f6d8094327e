//! Shared fixtures for the benchmarks in `benches/`.

use eqw_core::walk::evolve_standard;
use eqw_core::{make_localized, CoinBlochState, WalkState};

/// A standard-walk state after `steps` steps at `theta`, spread over about
/// `2 * steps` sites. Benchmarks use it as a realistically wide input.
pub fn spread_state(theta: f64, steps: usize) -> WalkState {
    let mut s = make_localized(0, CoinBlochState::symmetric());
    evolve_standard(&mut s, theta, steps);
    s
}

/// Evenly spaced momenta covering `[-pi, pi)`.
pub fn momentum_grid(points: usize) -> Vec<f64> {
    use std::f64::consts::PI;
    (0..points)
        .map(|i| -PI + 2.0 * PI * i as f64 / points as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_have_expected_shape() {
        let s = spread_state(0.7, 50);
        assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
        assert!(s.len() >= 101);
        let ks = momentum_grid(8);
        assert_eq!(ks.len(), 8);
        assert!(ks
            .iter()
            .all(|k| (-std::f64::consts::PI..std::f64::consts::PI).contains(k)));
    }
}

//! Exact evolution of the step-size-averaged walk.
//!
//! The ensemble-mean density operator is propagated in the two-momentum
//! representation `ρ(k_a, k_b) = Σ_{l,l'} ρ(l, l') e^{-i k_a l + i k_b l'}`
//! on a periodic lattice of `M` sites. The coin acts identically on every
//! block and the averaged shift multiplies each block entrywise, so every
//! momentum pair evolves on its own. Position probabilities follow from the
//! diagonal sums `G(q) = Σ_k ρ(k, k - q)` by one inverse FFT.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::matrix::dirichlet;
use crate::analysis::{fit_power_law, moments, PowerLawFit};
use crate::error::{invalid, Error, Result};
use crate::lattice::{CoinDensity, PositionDistribution, WalkState};
use crate::walk::{CoinParams, StepSizeRule};

type Block = [[C64; 2]; 2];

const ZERO: C64 = C64::new(0.0, 0.0);

/// The lattice must be at least this many standard deviations wide.
pub const ALIASING_SIGMAS: f64 = 8.0;

/// Step-averaged phase `E_t(x) = ⟨e^{iΔx}⟩` at `x = 2πj/M` for
/// `j = 0 … M-1`.
fn shift_average(rule: StepSizeRule, t: u64, m: usize) -> Vec<C64> {
    (0..m)
        .map(|j| {
            let x = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
            let phase = C64::from_polar(1.0, x);
            match rule {
                StepSizeRule::Unit => phase,
                StepSizeRule::Interval => phase * dirichlet(t, 0.5 * x),
            }
        })
        .collect()
}

/// Shift tables for `t = 1 … steps`, laid out as `[j][t-1]`.
fn shift_tables(rule: StepSizeRule, steps: usize, m: usize) -> Vec<C64> {
    let mut out = vec![ZERO; m * steps];
    for t in 1..=steps {
        let e = shift_average(rule, t as u64, m);
        for (j, v) in e.into_iter().enumerate() {
            out[j * steps + t - 1] = v;
        }
    }
    out
}

/// The coin part of one step, acting identically on every block.
#[derive(Debug, Clone, Copy)]
enum CoinMap {
    /// `ρ ↦ C ρ C†` with `C = [[cos θ, i sin θ], [i sin θ, cos θ]]`.
    Unitary { c: f64, s: f64 },
    /// The same conjugation averaged over `θ + ξ`, `ξ` uniform on `[-ε, ε]`:
    /// `ρ ↦ (1+a)/2 ρ + (1-a)/2 XρX + (ib/2)(Xρ - ρX)` with
    /// `a = ⟨cos 2(θ+ξ)⟩`, `b = ⟨sin 2(θ+ξ)⟩`.
    Jittered { a: f64, b: f64 },
}

impl CoinMap {
    fn new(coin: CoinParams) -> Self {
        let eps = coin.noise_epsilon;
        if eps == 0.0 {
            let (s, c) = coin.theta.sin_cos();
            return Self::Unitary { c, s };
        }
        let damp = (2.0 * eps).sin() / (2.0 * eps);
        let (s2, c2) = (2.0 * coin.theta).sin_cos();
        Self::Jittered {
            a: c2 * damp,
            b: s2 * damp,
        }
    }

    #[inline(always)]
    fn apply(self, rho: &mut Block) {
        let [[p, q], [r, s]] = *rho;
        match self {
            Self::Unitary { c, s: sn } => {
                let is = C64::new(0.0, sn);
                let x00 = p * c + r * is;
                let x01 = q * c + s * is;
                let x10 = p * is + r * c;
                let x11 = q * is + s * c;
                rho[0][0] = x00 * c - x01 * is;
                rho[0][1] = x01 * c - x00 * is;
                rho[1][0] = x10 * c - x11 * is;
                rho[1][1] = x11 * c - x10 * is;
            }
            Self::Jittered { a, b } => {
                let (keep, swap) = (0.5 * (1.0 + a), 0.5 * (1.0 - a));
                let ib = C64::new(0.0, 0.5 * b);
                rho[0][0] = p * keep + s * swap + (r - q) * ib;
                rho[0][1] = q * keep + r * swap + (s - p) * ib;
                rho[1][0] = r * keep + q * swap + (p - s) * ib;
                rho[1][1] = s * keep + p * swap + (q - r) * ib;
            }
        }
    }
}

/// `ρ ← S ∘ coin(ρ)`. `diff = E(k_a - k_b)` and `sum = E(k_a + k_b)`.
#[inline(always)]
fn step_block(rho: &mut Block, coin: CoinMap, diff: C64, sum: C64) {
    coin.apply(rho);
    rho[0][0] *= diff.conj();
    rho[0][1] *= sum.conj();
    rho[1][0] *= sum;
    rho[1][1] *= diff;
}

fn outer(u: [C64; 2], v: [C64; 2]) -> Block {
    [
        [u[0] * v[0].conj(), u[0] * v[1].conj()],
        [u[1] * v[0].conj(), u[1] * v[1].conj()],
    ]
}

fn check_size(m: usize) -> Result<()> {
    if m < 4 || !m.is_power_of_two() {
        return Err(invalid("m", format!("{m} is not a power of two ≥ 4")));
    }
    Ok(())
}

fn check_rule(rule: StepSizeRule) -> Result<()> {
    match rule {
        StepSizeRule::Unit | StepSizeRule::Interval => Ok(()),
    }
}

/// `(ψ↑(k), ψ↓(k))` for `k = 2πj/M`, `ψ(k) = Σ_l ψ(l) e^{-ikl}`.
fn momentum_spinors(init: &WalkState, m: usize) -> Result<Vec<[C64; 2]>> {
    let half = (m / 2) as i64;
    if init.window_lo() < -half || init.window_hi() >= half {
        return Err(invalid(
            "init",
            format!(
                "window [{}, {}] does not fit the lattice [-{half}, {half})",
                init.window_lo(),
                init.window_hi()
            ),
        ));
    }
    let fft = FftPlanner::new().plan_fft_forward(m);
    let mut up = vec![ZERO; m];
    let mut dn = vec![ZERO; m];
    for l in init.window_lo()..=init.window_hi() {
        let idx = l.rem_euclid(m as i64) as usize;
        up[idx] = init.up_at(l);
        dn[idx] = init.down_at(l);
    }
    fft.process(&mut up);
    fft.process(&mut dn);
    Ok(up.into_iter().zip(dn).map(|(u, d)| [u, d]).collect())
}

/// Position distribution on `[-M/2, M/2)` from the traced diagonal sums.
fn distribution_from_traces(g: &[C64], ifft: &Arc<dyn Fft<f64>>) -> PositionDistribution {
    let m = g.len();
    let mut buf = g.to_vec();
    ifft.process(&mut buf);
    let norm = 1.0 / (m as f64 * m as f64);
    let half = m / 2;
    let probs = (0..m)
        .map(|i| (buf[(i + m - half) % m].re * norm).max(0.0))
        .collect();
    PositionDistribution {
        window_lo: -(half as i64),
        probs,
    }
}

/// Full two-momentum state; memory grows as `M²`, so it suits small lattices.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPointState {
    m: usize,
    time: u64,
    /// Row-major: block `(a, b)` at `a * m + b`.
    blocks: Vec<Block>,
}

impl TwoPointState {
    pub fn from_walk_state(init: &WalkState, m: usize) -> Result<Self> {
        check_size(m)?;
        let psi = momentum_spinors(init, m)?;
        let mut blocks = Vec::with_capacity(m * m);
        for a in 0..m {
            for b in 0..m {
                blocks.push(outer(psi[a], psi[b]));
            }
        }
        Ok(Self { m, time: 0, blocks })
    }

    pub fn size(&self) -> usize {
        self.m
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    pub fn block(&self, a: usize, b: usize) -> Block {
        self.blocks[a * self.m + b]
    }

    /// One step averaged over the step-size law and the coin jitter.
    pub fn step(&mut self, coin: CoinParams, rule: StepSizeRule) {
        self.time += 1;
        let e = shift_average(rule, self.time, self.m);
        let map = CoinMap::new(coin);
        let m = self.m;
        self.blocks
            .par_chunks_mut(m)
            .enumerate()
            .for_each(|(a, row)| {
                for (b, rho) in row.iter_mut().enumerate() {
                    step_block(rho, map, e[(a + m - b) % m], e[(a + b) % m]);
                }
            });
    }

    /// `(1/M) Σ_k Tr ρ(k, k)`
    pub fn trace(&self) -> f64 {
        let s: f64 = (0..self.m)
            .map(|k| {
                let r = self.block(k, k);
                (r[0][0] + r[1][1]).re
            })
            .sum();
        s / self.m as f64
    }

    /// `max ‖ρ(a, b) - ρ(b, a)†‖`
    pub fn hermiticity_error(&self) -> f64 {
        let mut err: f64 = 0.0;
        for a in 0..self.m {
            for b in 0..self.m {
                let (x, y) = (self.block(a, b), self.block(b, a));
                for i in 0..2 {
                    for j in 0..2 {
                        err = err.max((x[i][j] - y[j][i].conj()).norm());
                    }
                }
            }
        }
        err
    }

    fn diagonal_sums(&self) -> Vec<Block> {
        let m = self.m;
        let mut g = vec![[[ZERO; 2]; 2]; m];
        for (q, gq) in g.iter_mut().enumerate() {
            for a in 0..m {
                let r = self.block(a, (a + m - q) % m);
                for i in 0..2 {
                    for j in 0..2 {
                        gq[i][j] += r[i][j];
                    }
                }
            }
        }
        g
    }

    /// Coin blocks `ρ(l, l)` for `l ∈ [-M/2, M/2)`.
    pub fn position_blocks(&self) -> Vec<Block> {
        let m = self.m;
        let g = self.diagonal_sums();
        let ifft = FftPlanner::new().plan_fft_inverse(m);
        let norm = 1.0 / (m as f64 * m as f64);
        let mut out = vec![[[ZERO; 2]; 2]; m];
        for i in 0..2 {
            for j in 0..2 {
                let mut buf: Vec<C64> = g.iter().map(|b| b[i][j]).collect();
                ifft.process(&mut buf);
                for (l, o) in out.iter_mut().enumerate() {
                    o[i][j] = buf[(l + m / 2) % m] * norm;
                }
            }
        }
        out
    }

    pub fn position_distribution(&self) -> PositionDistribution {
        let traces: Vec<C64> = self
            .diagonal_sums()
            .iter()
            .map(|b| b[0][0] + b[1][1])
            .collect();
        distribution_from_traces(&traces, &FftPlanner::new().plan_fft_inverse(self.m))
    }

    pub fn coin_density(&self) -> CoinDensity {
        let mut rho = [[ZERO; 2]; 2];
        for k in 0..self.m {
            let b = self.block(k, k);
            for i in 0..2 {
                for j in 0..2 {
                    rho[i][j] += b[i][j];
                }
            }
        }
        let inv = 1.0 / self.m as f64;
        CoinDensity {
            rho: [
                [rho[0][0] * inv, rho[0][1] * inv],
                [rho[1][0] * inv, rho[1][1] * inv],
            ],
        }
    }
}

/// Exact averaged-walk observables at every step `0 … T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelResult {
    pub m: usize,
    pub coin: CoinParams,
    pub rule: StepSizeRule,
    pub times: Vec<usize>,
    pub distributions: Vec<PositionDistribution>,
    pub coin_densities: Vec<CoinDensity>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    /// `Σ_l P_t(l)` before clamping rounding-level negatives.
    pub total_probability: Vec<f64>,
}

impl ChannelResult {
    /// `t,var`
    pub fn write_moments_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "var"])?;
        for (t, v) in self.times.iter().zip(&self.variances) {
            w.write_record([t.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn variance_at(&self, t: usize) -> Option<f64> {
        self.variances.get(t).copied()
    }
}

/// Streams every momentum pair through `steps` steps averaged over the
/// step-size law and the coin jitter, and collects the position
/// distribution and coin density at each step along with the moments. Fails with
/// [`Error::Aliasing`] once `8σ_t ≥ M`.
pub fn evolve_two_point_channel(
    m: usize,
    steps: usize,
    coin: CoinParams,
    init: &WalkState,
    rule: StepSizeRule,
) -> Result<ChannelResult> {
    check_size(m)?;
    check_rule(rule)?;
    if steps == 0 {
        return Err(invalid("steps", "must be at least 1"));
    }
    let coin = CoinParams::new(coin.theta, coin.noise_epsilon)?;
    let psi = momentum_spinors(init, m)?;
    let table = shift_tables(rule, steps, m);
    let map = CoinMap::new(coin);
    let n_t = steps + 1;

    // Traced sums G_t(q) for q ≤ M/2; the rest follow from Hermiticity.
    let rows: Vec<(Vec<C64>, Vec<Block>)> = (0..=m / 2)
        .into_par_iter()
        .map(|q| {
            let mut tr = vec![ZERO; n_t];
            let mut blocks = if q == 0 {
                vec![[[ZERO; 2]; 2]; n_t]
            } else {
                Vec::new()
            };
            let diff = &table[q * steps..(q + 1) * steps];
            for a in 0..m {
                let b = (a + m - q) % m;
                let sum_idx = (a + b) % m;
                let sum = &table[sum_idx * steps..(sum_idx + 1) * steps];
                let mut rho = outer(psi[a], psi[b]);
                tr[0] += rho[0][0] + rho[1][1];
                if q == 0 {
                    add_block(&mut blocks[0], &rho);
                }
                for t in 0..steps {
                    step_block(&mut rho, map, diff[t], sum[t]);
                    tr[t + 1] += rho[0][0] + rho[1][1];
                    if q == 0 {
                        add_block(&mut blocks[t + 1], &rho);
                    }
                }
            }
            (tr, blocks)
        })
        .collect();

    let ifft = FftPlanner::new().plan_fft_inverse(m);
    let mut result = ChannelResult {
        m,
        coin,
        rule,
        times: (0..n_t).collect(),
        distributions: Vec::with_capacity(n_t),
        coin_densities: Vec::with_capacity(n_t),
        means: Vec::with_capacity(n_t),
        variances: Vec::with_capacity(n_t),
        total_probability: Vec::with_capacity(n_t),
    };
    let inv_m = 1.0 / m as f64;
    let mut g = vec![ZERO; m];
    for t in 0..n_t {
        for q in 0..=m / 2 {
            g[q] = rows[q].0[t];
            if q > 0 && q < m - q {
                g[m - q] = rows[q].0[t].conj();
            }
        }
        let dist = distribution_from_traces(&g, &ifft);
        let mo = moments(&dist);
        let spread = ALIASING_SIGMAS * mo.variance.sqrt();
        if spread >= m as f64 {
            return Err(Error::Aliasing {
                time: t,
                spread,
                size: m,
            });
        }
        let b = rows[0].1[t];
        let rho = [
            [b[0][0] * inv_m, b[0][1] * inv_m],
            [b[1][0] * inv_m, b[1][1] * inv_m],
        ];
        result.total_probability.push(g[0].re * inv_m);
        result.coin_densities.push(CoinDensity { rho });
        result.means.push(mo.mean);
        result.variances.push(mo.variance);
        result.distributions.push(dist);
    }
    Ok(result)
}

#[inline(always)]
fn add_block(acc: &mut Block, rho: &Block) {
    for i in 0..2 {
        for j in 0..2 {
            acc[i][j] += rho[i][j];
        }
    }
}

/// Exact variance law of the averaged walk, fitted over `times`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceLaw {
    pub fit: PowerLawFit,
    pub channel: ChannelResult,
}

/// Runs the exact channel to `max(times)` and fits `Var[ℓ_t] ∝ t^α` on
/// `times`.
pub fn predict_variance_law(
    m: usize,
    theta: f64,
    init: &WalkState,
    times: &[usize],
) -> Result<VarianceLaw> {
    let (&t_min, &t_max) = match (times.iter().min(), times.iter().max()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(invalid("times", "is empty")),
    };
    let coin = CoinParams::new(theta, 0.0)?;
    let channel = evolve_two_point_channel(m, t_max, coin, init, StepSizeRule::Interval)?;
    let ts: Vec<f64> = times.iter().map(|&t| t as f64).collect();
    let vs: Vec<f64> = times.iter().map(|&t| channel.variances[t]).collect();
    let fit = fit_power_law(&ts, &vs, (t_min as f64, t_max as f64))?;
    Ok(VarianceLaw { fit, channel })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{make_localized, position_distribution, CoinBlochState};
    use crate::walk::evolve_standard;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn unit_rule_reproduces_the_standard_walk() {
        let init = make_localized(0, CoinBlochState::new(0.8, 1.9).unwrap());
        let ch = evolve_two_point_channel(
            128,
            32,
            CoinParams::noiseless(0.6),
            &init,
            StepSizeRule::Unit,
        )
        .unwrap();
        let mut s = init.clone();
        for t in 0..=32 {
            let exact = position_distribution(&s);
            let d = &ch.distributions[t];
            for l in -64..64 {
                assert!((d.get(l) - exact.get(l)).abs() < 1e-10, "t={t} l={l}");
            }
            evolve_standard(&mut s, 0.6, 1);
        }
    }

    #[test]
    fn streaming_matches_full_state() {
        let init = make_localized(0, CoinBlochState::new(1.2, 0.4).unwrap());
        let m = 64;
        let mut full = TwoPointState::from_walk_state(&init, m).unwrap();
        let coin = CoinParams::noiseless(FRAC_PI_4);
        let ch = evolve_two_point_channel(m, 6, coin, &init, StepSizeRule::Interval).unwrap();
        for t in 1..=6 {
            full.step(coin, StepSizeRule::Interval);
            let d = full.position_distribution();
            for l in -32..32 {
                assert!((d.get(l) - ch.distributions[t].get(l)).abs() < 1e-12);
            }
            let (a, b) = (full.coin_density(), ch.coin_densities[t]);
            for i in 0..2 {
                for j in 0..2 {
                    assert!((a.rho[i][j] - b.rho[i][j]).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn full_state_invariants() {
        let init = make_localized(0, CoinBlochState::symmetric());
        let mut st = TwoPointState::from_walk_state(&init, 64).unwrap();
        for _ in 0..8 {
            st.step(CoinParams::new(0.7, 0.2).unwrap(), StepSizeRule::Interval);
            assert!((st.trace() - 1.0).abs() < 1e-10);
            assert!(st.hermiticity_error() < 1e-10);
            for b in st.position_blocks() {
                let half_tr = 0.5 * (b[0][0].re + b[1][1].re);
                let gap = (0.25 * (b[0][0].re - b[1][1].re).powi(2) + b[0][1].norm_sqr()).sqrt();
                let lo = half_tr - gap;
                assert!(lo >= -1e-8);
            }
        }
    }

    #[test]
    fn trace_is_preserved_and_mean_vanishes() {
        let init = make_localized(0, CoinBlochState::symmetric());
        let ch = evolve_two_point_channel(
            2048,
            40,
            CoinParams::noiseless(FRAC_PI_4),
            &init,
            StepSizeRule::Interval,
        )
        .unwrap();
        for t in 0..=40 {
            assert!((ch.total_probability[t] - 1.0).abs() < 1e-9);
            assert!(ch.means[t].abs() < 1e-8, "t={t} mean={}", ch.means[t]);
        }
        // The leading term of the variance is Σ_s E[Δ_s²] ~ t³/9.
        let v = ch.variances[40];
        assert!(v > 0.05 * 40f64.powi(3) && v < 0.2 * 40f64.powi(3), "{v}");
    }

    #[test]
    fn guard_rejects_small_lattices() {
        let init = make_localized(0, CoinBlochState::symmetric());
        let coin = CoinParams::noiseless(FRAC_PI_4);
        let r = evolve_two_point_channel(64, 30, coin, &init, StepSizeRule::Interval);
        assert!(matches!(r, Err(Error::Aliasing { size: 64, .. })));
        assert!(evolve_two_point_channel(100, 3, coin, &init, StepSizeRule::Unit).is_err());
    }

    #[test]
    fn zero_jitter_limit_is_the_unitary_coin() {
        let mut a: Block = [
            [C64::new(0.3, 0.0), C64::new(0.1, 0.2)],
            [C64::new(-0.4, 0.05), C64::new(0.7, 0.0)],
        ];
        let mut b = a;
        CoinMap::Unitary {
            c: 0.9f64.cos(),
            s: 0.9f64.sin(),
        }
        .apply(&mut a);
        CoinMap::Jittered {
            a: 1.8f64.cos(),
            b: 1.8f64.sin(),
        }
        .apply(&mut b);
        for i in 0..2 {
            for j in 0..2 {
                assert!((a[i][j] - b[i][j]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn jittered_channel_matches_noisy_ensemble() {
        use crate::walk::run_ensemble;
        let init = make_localized(0, CoinBlochState::NORTH);
        let coin = CoinParams::new(0.6, 0.3).unwrap();
        let ch = evolve_two_point_channel(256, 12, coin, &init, StepSizeRule::Interval).unwrap();
        let ens =
            run_ensemble(&init, coin, StepSizeRule::Interval, 12, &[4, 12], 20_000, 3).unwrap();
        for (row, rho) in ens.moments.iter().zip(&ens.coin_densities) {
            assert!(
                (row.var - ch.variances[row.t]).abs() < 4.0 * row.se_var,
                "{row:?}"
            );
            let (x, y) = (rho.bloch(), ch.coin_densities[row.t].bloch());
            for i in 0..3 {
                assert!((x[i] - y[i]).abs() < 0.03, "{x:?} {y:?}");
            }
        }
    }

    #[test]
    fn moments_csv_header() {
        let init = make_localized(0, CoinBlochState::NORTH);
        let ch =
            evolve_two_point_channel(64, 3, CoinParams::noiseless(0.5), &init, StepSizeRule::Unit)
                .unwrap();
        let mut buf = Vec::new();
        ch.write_moments_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,var\n0,0\n"));
        assert_eq!(text.lines().count(), 5);
    }
}

//! Pure walker states on the one-dimensional lattice with a two-level coin.
//!
//! A [`WalkState`] stores the spin-up and spin-down amplitudes in two
//! independently based buffers. A coin-conditioned shift only moves the
//! buffer origins, so shifting is O(1) amortized; the buffers are regrown
//! geometrically when a shift pushes the occupied window past their ends.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Tolerance on the norm of constructed states.
pub const NORM_TOLERANCE: f64 = 1e-12;

/// Initial coin state on the Bloch sphere: `(cos γ/2, e^{-iφ} sin γ/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoinBlochState {
    pub gamma: f64,
    pub phi: f64,
}

impl CoinBlochState {
    /// `|↑⟩`
    pub const NORTH: Self = Self {
        gamma: 0.0,
        phi: 0.0,
    };
    /// `|↓⟩`
    pub const SOUTH: Self = Self {
        gamma: PI,
        phi: 0.0,
    };

    pub fn new(gamma: f64, phi: f64) -> Result<Self> {
        if !(0.0..=PI).contains(&gamma) {
            return Err(invalid("gamma", format!("{gamma} is outside [0, pi]")));
        }
        if !phi.is_finite() {
            return Err(invalid("phi", "must be finite"));
        }
        Ok(Self {
            gamma,
            phi: phi.rem_euclid(2.0 * PI),
        })
    }

    /// `(1, 1)/√2`: the coin state whose walk is mirror symmetric under the
    /// `cos θ / i sin θ` coin.
    pub fn symmetric() -> Self {
        Self {
            gamma: PI / 2.0,
            phi: 0.0,
        }
    }

    pub fn spinor(&self) -> [C64; 2] {
        let half = self.gamma / 2.0;
        [
            C64::new(half.cos(), 0.0),
            C64::from_polar(half.sin(), -self.phi),
        ]
    }
}

/// Gaussian wave packet `exp(-δ (l - l₀)² / 2)` in position space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPacketSpec {
    pub center: i64,
    pub delta: f64,
}

impl GaussianPacketSpec {
    /// Standard deviation of the `|amplitude|²` profile, `√(1/(2δ))`.
    pub fn position_sigma(&self) -> f64 {
        (0.5 / self.delta).sqrt()
    }
}

/// Pure state `|Ψ⟩_t` with amplitudes on a finite lattice window.
///
/// Amplitudes outside `[window_lo, window_hi]` are zero.
#[derive(Debug, Clone)]
pub struct WalkState {
    up: Vec<C64>,
    up_base: i64,
    down: Vec<C64>,
    down_base: i64,
    lo: i64,
    hi: i64,
    time: u64,
}

impl WalkState {
    /// Builds a state from explicit amplitudes starting at `window_lo`.
    pub fn from_amplitudes(window_lo: i64, up: Vec<C64>, down: Vec<C64>) -> Result<Self> {
        if up.is_empty() {
            return Err(invalid("amp_up", "window must hold at least one site"));
        }
        if up.len() != down.len() {
            return Err(invalid(
                "amp_down",
                format!(
                    "length {} differs from amp_up length {}",
                    down.len(),
                    up.len()
                ),
            ));
        }
        let norm: f64 = up.iter().chain(down.iter()).map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(invalid("amplitudes", format!("norm {norm} is not 1")));
        }
        let hi = window_lo + up.len() as i64 - 1;
        Ok(Self {
            up,
            up_base: window_lo,
            down,
            down_base: window_lo,
            lo: window_lo,
            hi,
            time: 0,
        })
    }

    pub fn window_lo(&self) -> i64 {
        self.lo
    }

    pub fn window_hi(&self) -> i64 {
        self.hi
    }

    pub fn len(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    pub fn set_time(&mut self, time: u64) {
        self.time = time;
    }

    pub fn amp_up(&self) -> &[C64] {
        let start = (self.lo - self.up_base) as usize;
        &self.up[start..start + self.len()]
    }

    pub fn amp_down(&self) -> &[C64] {
        let start = (self.lo - self.down_base) as usize;
        &self.down[start..start + self.len()]
    }

    pub fn up_at(&self, site: i64) -> C64 {
        if site < self.lo || site > self.hi {
            return C64::new(0.0, 0.0);
        }
        self.up[(site - self.up_base) as usize]
    }

    pub fn down_at(&self, site: i64) -> C64 {
        if site < self.lo || site > self.hi {
            return C64::new(0.0, 0.0);
        }
        self.down[(site - self.down_base) as usize]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amp_up()
            .iter()
            .chain(self.amp_down())
            .map(|a| a.norm_sqr())
            .sum()
    }

    /// Mutable views of both components over the window, site-aligned.
    pub(crate) fn window_mut(&mut self) -> (&mut [C64], &mut [C64]) {
        let len = self.len();
        let us = (self.lo - self.up_base) as usize;
        let ds = (self.lo - self.down_base) as usize;
        (&mut self.up[us..us + len], &mut self.down[ds..ds + len])
    }

    /// Moves spin-up amplitudes by `+delta` and spin-down by `-delta`.
    pub(crate) fn translate(&mut self, delta: i64) {
        if delta == 0 {
            return;
        }
        let (lo, hi) = (self.lo, self.hi);
        self.up_base += delta;
        self.down_base -= delta;
        let new_lo = lo - delta.abs();
        let new_hi = hi + delta.abs();
        grow(
            &mut self.up,
            &mut self.up_base,
            lo + delta,
            hi + delta,
            new_lo,
            new_hi,
        );
        grow(
            &mut self.down,
            &mut self.down_base,
            lo - delta,
            hi - delta,
            new_lo,
            new_hi,
        );
        self.lo = new_lo;
        self.hi = new_hi;
    }

    /// Projects onto `site` and renormalizes. Returns the probability of the
    /// outcome; a zero-probability site leaves the state unchanged.
    pub fn collapse_at(&mut self, site: i64) -> f64 {
        let u = self.up_at(site);
        let d = self.down_at(site);
        let p = u.norm_sqr() + d.norm_sqr();
        if p == 0.0 {
            return 0.0;
        }
        let scale = 1.0 / p.sqrt();
        let time = self.time;
        *self = Self {
            up: vec![u * scale],
            up_base: site,
            down: vec![d * scale],
            down_base: site,
            lo: site,
            hi: site,
            time,
        };
        p
    }
}

/// Makes `buf` (origin `base`) cover `[lo, hi]`; live data sits in
/// `[data_lo, data_hi]` and everything else in the buffer is zero.
fn grow(buf: &mut Vec<C64>, base: &mut i64, data_lo: i64, data_hi: i64, lo: i64, hi: i64) {
    if lo - *base >= 0 && hi - *base < buf.len() as i64 {
        return;
    }
    let width = (hi - lo + 1) as usize;
    let len = (2 * width).max(2 * buf.len()).max(16);
    let new_base = lo - ((len - width) / 2) as i64;
    let mut next = vec![C64::new(0.0, 0.0); len];
    let src = (data_lo - *base) as usize;
    let dst = (data_lo - new_base) as usize;
    let n = (data_hi - data_lo + 1) as usize;
    next[dst..dst + n].copy_from_slice(&buf[src..src + n]);
    *buf = next;
    *base = new_base;
}

/// `|l₀⟩ ⊗ |s⟩`
pub fn make_localized(l0: i64, coin: CoinBlochState) -> WalkState {
    let [a, b] = coin.spinor();
    WalkState::from_amplitudes(l0, vec![a], vec![b]).expect("spinor has unit norm")
}

/// Gaussian packet times the coin spinor, truncated at `truncation` standard
/// deviations of the `|amplitude|²` profile and renormalized.
pub fn make_gaussian_packet(
    spec: GaussianPacketSpec,
    coin: CoinBlochState,
    truncation: f64,
) -> Result<WalkState> {
    if !(spec.delta > 0.0) || !spec.delta.is_finite() {
        return Err(invalid("delta", format!("{} must be positive", spec.delta)));
    }
    if !(truncation > 0.0) || !truncation.is_finite() {
        return Err(invalid(
            "truncation",
            format!("{truncation} must be positive"),
        ));
    }
    let half = (truncation * spec.position_sigma()).ceil() as i64;
    let envelope: Vec<f64> = (-half..=half)
        .map(|x| (-spec.delta * (x as f64).powi(2) / 2.0).exp())
        .collect();
    let norm = envelope.iter().map(|e| e * e).sum::<f64>().sqrt();
    let [a, b] = coin.spinor();
    let up = envelope.iter().map(|e| a * (e / norm)).collect();
    let down = envelope.iter().map(|e| b * (e / norm)).collect();
    WalkState::from_amplitudes(spec.center - half, up, down)
}

/// Normalized position distribution `P_t(l)` on a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionDistribution {
    pub window_lo: i64,
    pub probs: Vec<f64>,
}

impl PositionDistribution {
    pub fn get(&self, site: i64) -> f64 {
        let idx = site - self.window_lo;
        if idx < 0 || idx >= self.probs.len() as i64 {
            0.0
        } else {
            self.probs[idx as usize]
        }
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn sites(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, &p)| (self.window_lo + i as i64, p))
    }

    /// Writes `l,p` rows for every site in the window.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["l", "p"])?;
        for (l, p) in self.sites() {
            w.write_record([l.to_string(), p.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `P(l) = |ψ↑(l)|² + |ψ↓(l)|²`
pub fn position_distribution(state: &WalkState) -> PositionDistribution {
    let probs = state
        .amp_up()
        .iter()
        .zip(state.amp_down())
        .map(|(u, d)| u.norm_sqr() + d.norm_sqr())
        .collect();
    PositionDistribution {
        window_lo: state.window_lo(),
        probs,
    }
}

/// 2×2 reduced coin density matrix, row-major `[[ρ↑↑, ρ↑↓], [ρ↓↑, ρ↓↓]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoinDensity {
    pub rho: [[C64; 2]; 2],
}

impl CoinDensity {
    /// `ρ = (I + r·σ)/2`
    pub fn from_bloch(r: [f64; 3]) -> Self {
        let half = 0.5;
        Self {
            rho: [
                [
                    C64::new(half * (1.0 + r[2]), 0.0),
                    C64::new(half * r[0], -half * r[1]),
                ],
                [
                    C64::new(half * r[0], half * r[1]),
                    C64::new(half * (1.0 - r[2]), 0.0),
                ],
            ],
        }
    }

    pub fn from_pure(spinor: [C64; 2]) -> Self {
        let mut rho = [[C64::new(0.0, 0.0); 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                rho[a][b] = spinor[a] * spinor[b].conj();
            }
        }
        Self { rho }
    }

    /// `r⁽ⁱ⁾ = Tr(ρ σᵢ)`
    pub fn bloch(&self) -> [f64; 3] {
        let off = self.rho[0][1];
        [
            2.0 * off.re,
            -2.0 * off.im,
            (self.rho[0][0] - self.rho[1][1]).re,
        ]
    }

    pub fn trace(&self) -> C64 {
        self.rho[0][0] + self.rho[1][1]
    }

    pub fn bloch_norm(&self) -> f64 {
        self.bloch().iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let tr = self.trace().re;
        let r = self.bloch_norm();
        [0.5 * (tr - r), 0.5 * (tr + r)]
    }

    pub fn hermiticity_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                worst = worst.max((self.rho[a][b] - self.rho[b][a].conj()).norm());
            }
        }
        worst
    }

    pub(crate) fn zero() -> Self {
        Self {
            rho: [[C64::new(0.0, 0.0); 2]; 2],
        }
    }

    pub(crate) fn add_assign(&mut self, other: &Self) {
        for a in 0..2 {
            for b in 0..2 {
                self.rho[a][b] += other.rho[a][b];
            }
        }
    }

    pub(crate) fn scaled(&self, s: f64) -> Self {
        let mut out = *self;
        for row in out.rho.iter_mut() {
            for x in row.iter_mut() {
                *x *= s;
            }
        }
        out
    }
}

/// `ρ̂ᶜ = Σ_l ⟨l|Ψ⟩⟨Ψ|l⟩`
pub fn reduced_coin_density(state: &WalkState) -> CoinDensity {
    let mut rho = CoinDensity::zero();
    for (u, d) in state.amp_up().iter().zip(state.amp_down()) {
        rho.rho[0][0] += u * u.conj();
        rho.rho[0][1] += u * d.conj();
        rho.rho[1][1] += d * d.conj();
    }
    rho.rho[1][0] = rho.rho[0][1].conj();
    rho
}

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// How the step-size average is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    /// `(1/2t) ∫_{1-t}^{1+t} dΔ`
    Continuous,
    /// Mean over the integers `{1-t, …, 1+t}`.
    Discrete,
}

/// What a [`StepMatrix`] was built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StepSource {
    Single { delta: i64 },
    Averaged { t: u64, kernel: Kernel },
}

/// Real 4×4 affine map on the Bloch 4-vector `(1, r1, r2, r3)` of the
/// momentum-`k` coin state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMatrix {
    pub m: [[f64; 4]; 4],
    pub k: f64,
    pub theta: f64,
    pub source: StepSource,
}

impl StepMatrix {
    fn from_trig(k: f64, theta: f64, cos2kd: f64, sin2kd: f64, source: StepSource) -> Self {
        let (s2t, c2t) = (2.0 * theta).sin_cos();
        Self {
            m: [
                [1.0, 0.0, 0.0, 0.0],
                [0.0, cos2kd, c2t * sin2kd, s2t * sin2kd],
                [0.0, -sin2kd, cos2kd * c2t, cos2kd * s2t],
                [0.0, 0.0, -s2t, c2t],
            ],
            k,
            theta,
            source,
        }
    }

    /// The lower-right 3×3 block acting on `(r1, r2, r3)`.
    pub fn block(&self) -> [[f64; 3]; 3] {
        let mut b = [[0.0; 3]; 3];
        for (i, row) in b.iter_mut().enumerate() {
            row.copy_from_slice(&self.m[i + 1][1..]);
        }
        b
    }

    /// `max |(B Bᵀ - I)_ij|` for the 3×3 block.
    pub fn orthogonality_error(&self) -> f64 {
        let b = self.block();
        let mut err: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|l| b[i][l] * b[j][l]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                err = err.max((dot - target).abs());
            }
        }
        err
    }

    pub fn apply(&self, r: [f64; 4]) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..4).map(|j| self.m[i][j] * r[j]).sum();
        }
        out
    }
}

/// Single-step map for shift magnitude `delta`.
pub fn build_step_matrix(k: f64, theta: f64, delta: i64) -> StepMatrix {
    let (s, c) = (2.0 * k * delta as f64).sin_cos();
    StepMatrix::from_trig(k, theta, c, s, StepSource::Single { delta })
}

/// `(1/(2t+1)) Σ_{j=-t}^{t} cos(2kj) = sin((2t+1)k) / ((2t+1) sin k)`
pub fn dirichlet(t: u64, k: f64) -> f64 {
    let n = (2 * t + 1) as f64;
    let sk = k.sin();
    if (n * sk).abs() < 1e-3 {
        // Near the removable singularity the ratio loses digits; sum directly.
        let s: f64 = (1..=t).map(|j| (2.0 * k * j as f64).cos()).sum();
        (1.0 + 2.0 * s) / n
    } else {
        (n * k).sin() / (n * sk)
    }
}

/// `sin(2kt) / (2kt)`, the continuous mean of `cos(2k(Δ-1))`.
pub fn sinc_kernel(t: u64, k: f64) -> f64 {
    let x = 2.0 * k * t as f64;
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Averaging factor `S` with `⟨cos 2kΔ⟩ = cos 2k · S` and
/// `⟨sin 2kΔ⟩ = sin 2k · S`.
pub fn kernel_factor(kernel: Kernel, t: u64, k: f64) -> f64 {
    match kernel {
        Kernel::Continuous => sinc_kernel(t, k),
        Kernel::Discrete => dirichlet(t, k),
    }
}

/// Step map averaged over the step-size law at time `t ≥ 1`.
pub fn averaged_step_matrix(k: f64, theta: f64, t: u64, kernel: Kernel) -> Result<StepMatrix> {
    if t == 0 {
        return Err(invalid("t", "must be at least 1"));
    }
    let s = kernel_factor(kernel, t, k);
    let (s2k, c2k) = (2.0 * k).sin_cos();
    Ok(StepMatrix::from_trig(
        k,
        theta,
        c2k * s,
        s2k * s,
        StepSource::Averaged { t, kernel },
    ))
}

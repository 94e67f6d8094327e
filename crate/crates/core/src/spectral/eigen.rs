use std::io::Write;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::matrix::{averaged_step_matrix, Kernel, StepMatrix};
use crate::analysis::linear_fit;
use crate::error::{invalid, Result};

/// Smallest R² for which a small-momentum fit is considered valid.
pub const MIN_R_SQUARED: f64 = 0.99;

/// Characteristic polynomial `λ³ + a2 λ² + a1 λ + a0` of a 3×3 matrix.
fn char_poly(b: &[[f64; 3]; 3]) -> [f64; 3] {
    let tr = b[0][0] + b[1][1] + b[2][2];
    let minors = b[0][0] * b[1][1] - b[0][1] * b[1][0] + b[0][0] * b[2][2] - b[0][2] * b[2][0]
        + b[1][1] * b[2][2]
        - b[1][2] * b[2][1];
    let det = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1])
        - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
        + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    [-tr, minors, -det]
}

fn eval(c: [f64; 3], z: C64) -> (C64, C64) {
    let [a2, a1, a0] = c;
    let p = ((z + a2) * z + a1) * z + a0;
    let dp = (z * 3.0 + 2.0 * a2) * z + a1;
    (p, dp)
}

/// A real root by bisection on the Cauchy bound.
fn real_root(c: [f64; 3]) -> f64 {
    let f = |x: f64| ((x + c[0]) * x + c[1]) * x + c[2];
    let bound = 1.0 + c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let (mut lo, mut hi) = (-bound, bound);
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if f(lo).abs() <= f(hi).abs() {
        lo
    } else {
        hi
    }
}

/// Newton steps that are kept only while they reduce the residual.
fn polish(c: [f64; 3], mut z: C64) -> C64 {
    let mut res = eval(c, z).0.norm();
    for _ in 0..8 {
        let (p, dp) = eval(c, z);
        if dp.norm() == 0.0 {
            break;
        }
        let next = z - p / dp;
        let r = eval(c, next).0.norm();
        if r < res {
            z = next;
            res = r;
        } else {
            break;
        }
    }
    z
}

/// Eigenvalues of a step matrix. `λ_1 = 1` belongs to the trivial first
/// row and column; the rest solve the cubic of the 3×3 block. When the block
/// has one real eigenvalue it is `λ_2`, `λ_3` is the member of the complex
/// pair with positive imaginary part and `λ_4 = conj(λ_3)`. Three real roots
/// are ordered by descending modulus, then ascending phase.
pub fn eigenvalues(matrix: &StepMatrix) -> [C64; 4] {
    let c = char_poly(&matrix.block());
    let r = polish(c, C64::new(real_root(c), 0.0)).re;
    // Deflate: p(λ) = (λ - r)(λ² + bλ + q).
    let b = c[0] + r;
    let q = c[1] + r * b;
    let disc = b * b - 4.0 * q;
    let one = C64::new(1.0, 0.0);
    if disc < 0.0 {
        let z = polish(c, C64::new(-0.5 * b, 0.5 * (-disc).sqrt()));
        let z = if z.im < 0.0 { z.conj() } else { z };
        return [one, C64::new(r, 0.0), z, z.conj()];
    }
    let s = disc.sqrt();
    let x1 = -0.5 * (b + b.signum() * s);
    let x2 = if x1 != 0.0 {
        q / x1
    } else {
        -0.5 * (b - b.signum() * s)
    };
    let mut roots = [
        r,
        polish(c, C64::new(x1, 0.0)).re,
        polish(c, C64::new(x2, 0.0)).re,
    ];
    roots.sort_by(|a, b| {
        b.abs()
            .total_cmp(&a.abs())
            .then(C64::new(*a, 0.0).arg().total_cmp(&C64::new(*b, 0.0).arg()))
    });
    [
        one,
        C64::new(roots[0], 0.0),
        C64::new(roots[1], 0.0),
        C64::new(roots[2], 0.0),
    ]
}

/// Eigenvalues of the averaged map at one `(k, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenSample {
    pub k: f64,
    pub t: u64,
    pub lambda: [C64; 4],
}

/// Eigenvalues of the averaged map on the product grid `ks × ts`.
pub fn eigen_grid(theta: f64, kernel: Kernel, ks: &[f64], ts: &[u64]) -> Result<Vec<EigenSample>> {
    let mut out = Vec::with_capacity(ks.len() * ts.len());
    for &t in ts {
        for &k in ks {
            let m = averaged_step_matrix(k, theta, t, kernel)?;
            out.push(EigenSample {
                k,
                t,
                lambda: eigenvalues(&m),
            });
        }
    }
    Ok(out)
}

/// `k,t,re_l1,im_l1,…,re_l4,im_l4`
pub fn write_eigen_csv<W: Write>(samples: &[EigenSample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["k".to_string(), "t".to_string()];
    for i in 1..=4 {
        header.push(format!("re_l{i}"));
        header.push(format!("im_l{i}"));
    }
    w.write_record(&header)?;
    for s in samples {
        let mut row = vec![s.k.to_string(), s.t.to_string()];
        for l in &s.lambda {
            row.push(l.re.to_string());
            row.push(l.im.to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Straight-line fits of one eigenvalue against `x = k²t²`:
/// `-ln|λ| ≈ decay_intercept + decay · x` and
/// `arg λ ≈ phase_intercept + phase_curvature · x`. Together they fit the
/// complex logarithm `ln λ ≈ a + (-decay + i·phase_curvature) x`, whose
/// goodness of fit is `log_r_squared`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenFit {
    /// 1-based eigenvalue label.
    pub index: usize,
    pub decay: f64,
    pub decay_intercept: f64,
    pub decay_r_squared: f64,
    pub phase_curvature: f64,
    pub phase_intercept: f64,
    pub phase_r_squared: f64,
    /// R² of the complex fit of `ln λ`, pooling real and imaginary residuals.
    pub log_r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenExpansion {
    pub theta: f64,
    pub kernel: Kernel,
    /// Fits for `λ_2`, `λ_3`, `λ_4`; `λ_1 = 1` needs none.
    pub fits: Vec<EigenFit>,
    pub samples: Vec<EigenSample>,
    /// Largest `|λ_i|` over all samples.
    pub max_modulus: f64,
    /// Largest `|λ_4 - conj(λ_3)|` over all samples.
    pub conjugate_error: f64,
    /// Every complex-logarithm fit reaches [`MIN_R_SQUARED`] and no modulus
    /// exceeds one.
    pub valid: bool,
}

/// Residual and total sums of squares of `y` about the line `a + b x`.
fn sums_of_squares(x: &[f64], y: &[f64], b: f64, a: f64) -> (f64, f64) {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let res = x.iter().zip(y).map(|(x, y)| (y - a - b * x).powi(2)).sum();
    let tot = y.iter().map(|y| (y - mean).powi(2)).sum();
    (res, tot)
}

/// Fits the small-momentum behaviour of the averaged map's eigenvalues.
/// The grid must satisfy `|k| ≤ 0.1 / max(t)`.
pub fn small_k_expansion(
    theta: f64,
    kernel: Kernel,
    t_list: &[u64],
    k_grid: &[f64],
) -> Result<EigenExpansion> {
    let t_max = *t_list
        .iter()
        .max()
        .ok_or_else(|| invalid("t_list", "is empty"))?;
    if t_list.contains(&0) {
        return Err(invalid("t_list", "times must be at least 1"));
    }
    let limit = 0.1 / t_max as f64;
    if let Some(k) = k_grid.iter().find(|k| k.abs() > limit * (1.0 + 1e-12)) {
        return Err(invalid(
            "k_grid",
            format!("|k| = {} exceeds 0.1 / t_max = {limit}", k.abs()),
        ));
    }
    if k_grid.len() * t_list.len() < 3 {
        return Err(invalid("k_grid", "need at least three (k, t) points"));
    }
    let samples = eigen_grid(theta, kernel, k_grid, t_list)?;
    let x: Vec<f64> = samples.iter().map(|s| (s.k * s.t as f64).powi(2)).collect();
    let fits: Vec<EigenFit> = (1..4)
        .map(|i| {
            let decay: Vec<f64> = samples.iter().map(|s| -s.lambda[i].norm().ln()).collect();
            let phase: Vec<f64> = samples.iter().map(|s| s.lambda[i].arg()).collect();
            let (b, b0, rb) = linear_fit(&x, &decay);
            let (c, c0, rc) = linear_fit(&x, &phase);
            let (res_d, tot_d) = sums_of_squares(&x, &decay, b, b0);
            let (res_p, tot_p) = sums_of_squares(&x, &phase, c, c0);
            let tot = tot_d + tot_p;
            let log_r_squared = if tot > 0.0 {
                (1.0 - (res_d + res_p) / tot).clamp(0.0, 1.0)
            } else {
                1.0
            };
            EigenFit {
                index: i + 1,
                decay: b,
                decay_intercept: b0,
                decay_r_squared: rb,
                phase_curvature: c,
                phase_intercept: c0,
                phase_r_squared: rc,
                log_r_squared,
            }
        })
        .collect();
    let max_modulus = samples
        .iter()
        .flat_map(|s| s.lambda.iter().map(|l| l.norm()))
        .fold(0.0, f64::max);
    let conjugate_error = samples
        .iter()
        .map(|s| (s.lambda[3] - s.lambda[2].conj()).norm())
        .fold(0.0, f64::max);
    let valid = max_modulus <= 1.0 + 1e-10 && fits.iter().all(|f| f.log_r_squared >= MIN_R_SQUARED);
    Ok(EigenExpansion {
        theta,
        kernel,
        fits,
        samples,
        max_modulus,
        conjugate_error,
        valid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::matrix::build_step_matrix;
    use std::f64::consts::{FRAC_PI_4, PI};

    #[test]
    fn zero_momentum_spectrum() {
        for i in 1..20 {
            let theta = PI * i as f64 / 40.0;
            let m = averaged_step_matrix(0.0, theta, 10, Kernel::Discrete).unwrap();
            let l = eigenvalues(&m);
            let e = C64::from_polar(1.0, 2.0 * theta);
            assert!((l[0] - 1.0).norm() < 1e-10);
            assert!((l[1] - 1.0).norm() < 1e-10);
            let pair = (l[2] - e).norm().min((l[2] - e.conj()).norm());
            assert!(pair < 1e-10, "theta={theta} {l:?}");
            assert_eq!(l[3], l[2].conj());
        }
    }

    #[test]
    fn single_step_spectrum_is_unimodular() {
        let mut rng = crate::rng::stream_rng(12, 0);
        use rand::Rng;
        for _ in 0..500 {
            let k = rng.random_range(-PI..PI);
            let theta = rng.random_range(0.0..PI);
            let d = rng.random_range(-100i64..100);
            for l in eigenvalues(&build_step_matrix(k, theta, d)) {
                assert!((l.norm() - 1.0).abs() < 1e-10, "{k} {theta} {d} {l}");
            }
        }
    }

    #[test]
    fn averaged_map_contracts() {
        let m = averaged_step_matrix(0.002, FRAC_PI_4, 200, Kernel::Discrete).unwrap();
        let l = eigenvalues(&m);
        assert_eq!(l[0], C64::new(1.0, 0.0));
        assert!(l[1].norm() < 1.0 && l[2].norm() < 1.0);
    }

    #[test]
    fn eigenvalues_match_determinant_and_trace() {
        let m = averaged_step_matrix(0.7, 1.1, 3, Kernel::Continuous).unwrap();
        let l = eigenvalues(&m);
        let b = m.block();
        let tr = b[0][0] + b[1][1] + b[2][2];
        assert!((l[1] + l[2] + l[3] - tr).norm() < 1e-12);
        let c = char_poly(&b);
        assert!((l[1] * l[2] * l[3] + c[2]).norm() < 1e-12);
    }

    #[test]
    fn small_k_fits_and_collapse() {
        let ts = [40u64, 80, 160];
        let ks: Vec<f64> = (0..=20)
            .map(|i| 0.1 / 160.0 * 10f64.powf(-1.0 + i as f64 / 20.0))
            .collect();
        let exp = small_k_expansion(FRAC_PI_4, Kernel::Discrete, &ts, &ks).unwrap();
        assert!(exp.valid, "{:?}", exp.fits);
        assert!(exp.conjugate_error < 1e-10);
        assert!(exp.max_modulus <= 1.0 + 1e-10);
        assert!(exp
            .fits
            .iter()
            .all(|f| f.decay > 0.0 && f.decay_r_squared > 0.999));
        // The phase of the complex pair carries no k²t² term: it moves as k²
        // at fixed t, so the pooled phase-only fit is poor.
        assert!(exp.fits[1].phase_curvature.abs() < 1e-3);

        // log λ depends on k t only, to leading order.
        let k = 0.1 / 320.0;
        let a = eigenvalues(&averaged_step_matrix(k, FRAC_PI_4, 80, Kernel::Discrete).unwrap());
        let b =
            eigenvalues(&averaged_step_matrix(k / 2.0, FRAC_PI_4, 160, Kernel::Discrete).unwrap());
        for i in 1..4 {
            let (la, lb) = (a[i].ln(), b[i].ln());
            assert!((la - lb).norm() <= 0.01 * la.norm(), "{i}: {la} {lb}");
        }
    }

    #[test]
    fn grid_limits_are_enforced() {
        assert!(small_k_expansion(0.5, Kernel::Discrete, &[100], &[0.01, 0.0001, 0.0002]).is_err());
        assert!(small_k_expansion(0.5, Kernel::Discrete, &[], &[0.0]).is_err());
    }

    #[test]
    fn eigen_csv_header() {
        let s = eigen_grid(0.3, Kernel::Discrete, &[0.0, 0.1], &[1, 2]).unwrap();
        let mut buf = Vec::new();
        write_eigen_csv(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("k,t,re_l1,im_l1,re_l2,im_l2,re_l3,im_l3,re_l4,im_l4\n"));
        assert_eq!(text.lines().count(), 5);
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Minimum number of points a fit window must hold.
pub const MIN_FIT_POINTS: usize = 5;

/// `value ≈ coefficient · t^exponent`, fitted in log-log space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub coefficient: f64,
    pub r_squared: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub exponent_stderr: f64,
    pub coefficient_stderr: f64,
    pub points: usize,
}

struct Line {
    slope: f64,
    intercept: f64,
    r_squared: f64,
    slope_se: f64,
    intercept_se: f64,
}

fn select(
    times: &[f64],
    values: &[f64],
    sigmas: Option<&[f64]>,
    window: (f64, f64),
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    if times.len() != values.len() || sigmas.is_some_and(|s| s.len() != times.len()) {
        return Err(invalid(
            "values",
            "times, values and sigmas differ in length",
        ));
    }
    let (t_min, t_max) = window;
    if !(t_min < t_max) {
        return Err(invalid("window", format!("[{t_min}, {t_max}] is empty")));
    }
    let (mut x, mut y, mut w) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..times.len() {
        let t = times[i];
        if t < t_min || t > t_max {
            continue;
        }
        let v = values[i];
        if !(v > 0.0) || !(t > 0.0) {
            return Err(invalid(
                "values",
                format!("non-positive point ({t}, {v}) inside the fit window"),
            ));
        }
        x.push(t.ln());
        y.push(v.ln());
        w.push(match sigmas {
            // relative error of v is the absolute error of ln v
            Some(s) => {
                let rel = s[i] / v;
                if rel > 0.0 {
                    1.0 / (rel * rel)
                } else {
                    return Err(invalid("sigmas", "must be positive inside the window"));
                }
            }
            None => 1.0,
        });
    }
    if x.len() < MIN_FIT_POINTS {
        return Err(Error::FitWindow {
            t_min,
            t_max,
            points: x.len(),
            required: MIN_FIT_POINTS,
        });
    }
    Ok((x, y, w))
}

fn weighted_line(x: &[f64], y: &[f64], w: &[f64], known_sigmas: bool) -> Line {
    let n = x.len() as f64;
    let sw: f64 = w.iter().sum();
    let xm = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let ym = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..x.len() {
        let (dx, dy) = (x[i] - xm, y[i] - ym);
        sxx += w[i] * dx * dx;
        sxy += w[i] * dx * dy;
        syy += w[i] * dy * dy;
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let ss_res: f64 = (0..x.len())
        .map(|i| w[i] * (y[i] - intercept - slope * x[i]).powi(2))
        .sum();
    let r_squared = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let reduced = ss_res / (n - 2.0);
    // Known measurement errors: inflate only when the scatter exceeds them.
    let scale = if known_sigmas {
        reduced.max(1.0)
    } else {
        reduced
    };
    let slope_se = (scale / sxx).sqrt();
    let intercept_se = (scale * (1.0 / sw + xm * xm / sxx)).sqrt();
    Line {
        slope,
        intercept,
        r_squared,
        slope_se,
        intercept_se,
    }
}

fn to_fit(line: Line, window: (f64, f64), points: usize) -> PowerLawFit {
    let coefficient = line.intercept.exp();
    PowerLawFit {
        exponent: line.slope,
        coefficient,
        r_squared: line.r_squared,
        t_min: window.0,
        t_max: window.1,
        exponent_stderr: line.slope_se,
        coefficient_stderr: coefficient * line.intercept_se,
        points,
    }
}

/// Slope, intercept and R² of an unweighted straight-line fit `y ≈ a + b x`.
pub(crate) fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let w = vec![1.0; x.len()];
    let line = weighted_line(x, y, &w, false);
    (line.slope, line.intercept, line.r_squared)
}

/// Ordinary least squares of `ln value` on `ln t` over `t ∈ [t_min, t_max]`.
pub fn fit_power_law(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<PowerLawFit> {
    let (x, y, w) = select(times, values, None, window)?;
    Ok(to_fit(weighted_line(&x, &y, &w, false), window, x.len()))
}

/// Weighted least squares using absolute standard errors `sigmas` of the
/// values. Parameter errors are scaled up by the reduced χ² when the scatter
/// exceeds the stated errors.
pub fn fit_power_law_weighted(
    times: &[f64],
    values: &[f64],
    sigmas: &[f64],
    window: (f64, f64),
) -> Result<PowerLawFit> {
    let (x, y, w) = select(times, values, Some(sigmas), window)?;
    Ok(to_fit(weighted_line(&x, &y, &w, true), window, x.len()))
}

/// Integer times spaced geometrically from `t_min` to `t_max` (both
/// included), `per_octave` per factor of two, deduplicated.
pub fn log_spaced_times(t_min: usize, t_max: usize, per_octave: usize) -> Vec<usize> {
    let t_min = t_min.max(1);
    if t_max <= t_min {
        return vec![t_min];
    }
    let octaves = (t_max as f64 / t_min as f64).log2();
    let n = (octaves * per_octave.max(1) as f64).ceil() as usize;
    let mut out: Vec<usize> = (0..=n)
        .map(|i| (t_min as f64 * 2f64.powf(octaves * i as f64 / n as f64)).round() as usize)
        .collect();
    out.dedup();
    out
}

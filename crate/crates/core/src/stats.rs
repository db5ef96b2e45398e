//! Robust location statistics over error multisets.

use crate::error::{Error, Result};

fn sorted(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::validation(format!("non-finite value {v}")));
    }
    let mut v = values.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    Ok(v)
}

/// Mean as `x0 + sum(x - x0) / n`, exact on constant input.
fn shifted_mean(values: &[f64]) -> f64 {
    let x0 = values[0];
    x0 + values.iter().map(|v| v - x0).sum::<f64>() / values.len() as f64
}

fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn mean(values: &[f64]) -> Result<f64> {
    let v = sorted(values)?;
    Ok(shifted_mean(&v))
}

pub fn median(values: &[f64]) -> Result<f64> {
    Ok(median_sorted(&sorted(values)?))
}

/// Drops `floor(percent / 100 * n)` values from each tail and averages the
/// rest; falls back to the median if nothing is left.
pub fn trimmed_mean(values: &[f64], percent: u32) -> Result<f64> {
    if percent > 50 {
        return Err(Error::validation(format!("trim percentage {percent} exceeds 50")));
    }
    let v = sorted(values)?;
    let cut = percent as usize * v.len() / 100;
    if 2 * cut >= v.len() {
        return Ok(median_sorted(&v));
    }
    Ok(shifted_mean(&v[cut..v.len() - cut]))
}

/// Linear interpolation at position `q * (n - 1)` of sorted data.
fn quantile_sorted(v: &[f64], q: f64) -> f64 {
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    v[lo] + (v[hi] - v[lo]) * frac
}

pub fn quartiles(values: &[f64]) -> Result<(f64, f64)> {
    let v = sorted(values)?;
    Ok((quantile_sorted(&v, 0.25), quantile_sorted(&v, 0.75)))
}

/// Mean of the values inside the Tukey fences `[Q1 - 1.5 IQR, Q3 + 1.5 IQR]`.
pub fn mean_inliers(values: &[f64]) -> Result<f64> {
    let v = sorted(values)?;
    let q1 = quantile_sorted(&v, 0.25);
    let q3 = quantile_sorted(&v, 0.75);
    let iqr = q3 - q1;
    let (lo, hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inliers: Vec<f64> = v.into_iter().filter(|x| (lo..=hi).contains(x)).collect();
    // the median always lies inside the fences
    Ok(shifted_mean(&inliers))
}

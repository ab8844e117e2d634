//! Optimal subpattern assignment distance on azimuth sets.

use serde::{Deserialize, Serialize};

use super::assignment::munkres;
use crate::geometry::wrap;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OspaParams {
    /// Order, `p ≥ 1`.
    pub p: f64,
    /// Cutoff in degrees.
    pub c: f64,
}

impl OspaParams {
    pub fn new(p: f64, c: f64) -> Result<Self> {
        if !(p >= 1.0) || !p.is_finite() {
            return Err(Error::invalid(format!("OSPA order {p} must be ≥ 1")));
        }
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::invalid(format!("OSPA cutoff {c} must be > 0")));
        }
        Ok(Self { p, c })
    }
}

impl Default for OspaParams {
    fn default() -> Self {
        Self { p: 1.0, c: 30.0 }
    }
}

/// Cutoff azimuth distance in degrees between two azimuths in radians.
pub fn cutoff_distance(a: f64, b: f64, c: f64) -> f64 {
    wrap(a - b).abs().to_degrees().min(c)
}

/// OSPA between two azimuth sets (radians), in degrees.
///
/// With the smaller set `A` and larger `B`,
/// `[(1/|B|)(min_π Σ d_c(a, π(a))^p + (|B| − |A|)·c^p)]^{1/p}`; zero when
/// both are empty. The result is symmetric in its arguments.
pub fn ospa(truth: &[f64], estimates: &[f64], params: OspaParams) -> f64 {
    let (a, b) = if truth.len() <= estimates.len() {
        (truth, estimates)
    } else {
        (estimates, truth)
    };
    if b.is_empty() {
        return 0.0;
    }
    let OspaParams { p, c } = params;
    let matched = if a.is_empty() {
        0.0
    } else {
        let cost: Vec<Vec<f64>> = a
            .iter()
            .map(|&x| {
                b.iter()
                    .map(|&y| cutoff_distance(x, y, c).powf(p))
                    .collect()
            })
            .collect();
        munkres(&cost).expect("finite rectangular costs").total
    };
    let inner = (matched + (b.len() - a.len()) as f64 * c.powf(p)) / b.len() as f64;
    inner.powf(1.0 / p).clamp(0.0, c)
}

/// Per-timestamp OSPA with summary statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OspaSeries {
    pub params: OspaParams,
    pub values: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

pub fn ospa_series(
    truth: &[Vec<f64>],
    estimates: &[Vec<f64>],
    params: OspaParams,
) -> Result<OspaSeries> {
    if truth.len() != estimates.len() {
        return Err(Error::invalid("truth and estimate series differ in length"));
    }
    let values: Vec<f64> = truth
        .iter()
        .zip(estimates)
        .map(|(t, e)| ospa(t, e, params))
        .collect();
    let (mean, std) = mean_std(&values);
    Ok(OspaSeries {
        params,
        values,
        mean,
        std,
    })
}

/// Mean and population standard deviation; zeros for an empty slice.
pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

//! Pairwise delay estimation and delay-based direction fitting.

use rustfft::FftPlanner;

use super::{phat, DoaGrid};
use crate::geometry::{ArrayGeometry, Doa, Vec3};
use crate::sigproc::{CrossSpectrum, C64};
use crate::{Error, Result};

const COINCIDENT_TOL: f64 = 1e-6;

/// Delay of channel `m` relative to channel `ℓ`, in samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdoaEstimate {
    pub pair: (usize, usize),
    pub delay: f64,
    pub confidence: f64,
}

/// `(f_s/c)·(‖x_s − x_m‖ − ‖x_s − x_ℓ‖)`: positive when `x_m` is farther
/// from the source.
pub fn expected_tdoa(
    source: &Vec3,
    mic_m: &Vec3,
    mic_l: &Vec3,
    sample_rate_hz: f64,
    c: f64,
) -> Result<f64> {
    let dm = (source - mic_m).norm();
    let dl = (source - mic_l).norm();
    if dm <= COINCIDENT_TOL || dl <= COINCIDENT_TOL {
        return Err(Error::DegenerateGeometry(
            "source coincides with a microphone".into(),
        ));
    }
    Ok(sample_rate_hz / c * (dm - dl))
}

/// Plane-wave limit of [`expected_tdoa`] for a unit `direction` towards the source.
pub fn far_field_tdoa(
    direction: &Vec3,
    mic_m: &Vec3,
    mic_l: &Vec3,
    sample_rate_hz: f64,
    c: f64,
) -> f64 {
    sample_rate_hz / c * direction.dot(&(mic_l - mic_m))
}

/// Largest delay a pair can physically observe, in samples.
pub fn max_physical_lag(mic_m: &Vec3, mic_l: &Vec3, sample_rate_hz: f64, c: f64) -> f64 {
    sample_rate_hz / c * (mic_m - mic_l).norm()
}

/// GCC-PHAT delay estimate.
///
/// The whitened cross spectrum is zero-padded to `interpolation` times the
/// window length before the inverse transform, the peak is searched over
/// `|τ| ≤ max_lag` and refined with a three-point parabola. `confidence` is
/// the peak height with `R(0) = 1` for identical channels.
pub fn gcc_phat(cs: &CrossSpectrum, max_lag: f64, interpolation: usize) -> Result<TdoaEstimate> {
    if interpolation == 0 {
        return Err(Error::invalid("interpolation factor must be ≥ 1"));
    }
    if !(max_lag >= 0.0) {
        return Err(Error::invalid(format!("max_lag {max_lag} must be ≥ 0")));
    }
    let weights = phat(cs.values())?;
    let n = cs.window_length();
    let size = n * interpolation;
    let mut full = vec![C64::new(0.0, 0.0); size];
    full[0] = weights[0];
    for k in 1..weights.len() {
        if 2 * k == n {
            full[k] += weights[k] * 0.5;
            full[size - k] += weights[k].conj() * 0.5;
        } else {
            full[k] = weights[k];
            full[size - k] = weights[k].conj();
        }
    }
    FftPlanner::<f64>::new()
        .plan_fft_inverse(size)
        .process(&mut full);
    let r = |lag: isize| full[lag.rem_euclid(size as isize) as usize].re / n as f64;

    let limit = ((max_lag * interpolation as f64).floor() as isize).min(size as isize / 2 - 1);
    let mut best = -limit;
    for lag in -limit..=limit {
        if r(lag) > r(best) {
            best = lag;
        }
    }
    let (y0, ym, yp) = (r(best), r(best - 1), r(best + 1));
    let denom = ym - 2.0 * y0 + yp;
    let shift = if denom < 0.0 {
        (0.5 * (ym - yp) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    Ok(TdoaEstimate {
        pair: cs.pair(),
        delay: (best as f64 + shift) / interpolation as f64,
        confidence: y0 - 0.25 * (ym - yp) * shift,
    })
}

/// Least-squares far-field fit of measured delays over a 1° horizontal ring.
pub fn tdoa_to_azimuth(
    estimates: &[TdoaEstimate],
    geometry: &ArrayGeometry,
    sample_rate_hz: f64,
    c: f64,
) -> Result<Doa> {
    let grid = DoaGrid::azimuth_ring(1.0)?;
    tdoa_fit(estimates, geometry, &grid, sample_rate_hz, c)
}

/// Grid direction minimizing `Σ (τ_measured − τ_far_field(Ω))²`.
///
/// Ties (within rounding) go to the smallest azimuth ≥ 0, else to the lowest
/// grid index.
pub fn tdoa_fit(
    estimates: &[TdoaEstimate],
    geometry: &ArrayGeometry,
    grid: &DoaGrid,
    sample_rate_hz: f64,
    c: f64,
) -> Result<Doa> {
    if estimates.is_empty() {
        return Err(Error::Underdetermined("no delay estimates".into()));
    }
    let m = geometry.mic_count();
    let mut baselines = Vec::with_capacity(estimates.len());
    for e in estimates {
        let (a, b) = e.pair;
        if a >= m || b >= m {
            return Err(Error::invalid(format!(
                "pair ({a}, {b}) out of range for {m} mics"
            )));
        }
        baselines.push((geometry.mic(b) - geometry.mic(a)) * (sample_rate_hz / c));
    }
    let costs: Vec<f64> = grid
        .directions()
        .iter()
        .map(|d| {
            let u = d.to_unit_vector();
            estimates
                .iter()
                .zip(&baselines)
                .map(|(e, b)| (e.delay - u.dot(b)).powi(2))
                .sum()
        })
        .collect();
    let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = 1e-12 + 1e-9 * min.abs();
    let tied = || {
        costs
            .iter()
            .enumerate()
            .filter(|(_, &v)| v <= min + tol)
            .map(|(i, _)| i)
    };
    let dirs = grid.directions();
    let best = tied()
        .filter(|&i| dirs[i].azimuth() >= 0.0)
        .min_by(|&a, &b| dirs[a].azimuth().total_cmp(&dirs[b].azimuth()))
        .or_else(|| tied().next())
        .expect("grid is nonempty");
    Ok(dirs[best])
}

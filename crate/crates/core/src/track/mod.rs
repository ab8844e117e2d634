//! Sequential smoothing of azimuth estimates and track management.
//!
//! The state is `[azimuth (rad), azimuth rate (rad/s)]` under a
//! constant-velocity model with white-acceleration process noise of
//! intensity `q` (rad²/s³). Observations are azimuth only. Innovations are
//! always wrapped to `[−π, π)`.

mod kalman;
mod lifecycle;
mod particle;
mod wrapped;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::geometry::wrap;
use crate::{Error, Result};

pub use kalman::{kf_predict, kf_update};
pub use lifecycle::{track_lifecycle, tracks_to_estimates, LifecycleConfig, Track, TrackerKind};
pub use particle::{pf_predict, pf_step, pf_update, ParticleSet, PfStep};
pub use wrapped::{wrapped_kf_predict, wrapped_kf_update, MixtureComponent, WrappedMixture};

/// Default observation noise std, 3°.
pub const DEFAULT_OBS_STD: f64 = 3.0 * std::f64::consts::PI / 180.0;

/// Default process-noise intensity, (0.5 rad/s^1.5)².
pub const DEFAULT_PROCESS_NOISE: f64 = 0.25;

/// Noise parameters shared by all filters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseParams {
    /// White-acceleration intensity, rad²/s³.
    pub process_noise: f64,
    /// Observation noise standard deviation, rad.
    pub obs_std: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            process_noise: DEFAULT_PROCESS_NOISE,
            obs_std: DEFAULT_OBS_STD,
        }
    }
}

impl NoiseParams {
    pub fn obs_var(&self) -> f64 {
        self.obs_std * self.obs_std
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Terminated,
}

/// Gaussian azimuth state of one track.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackState {
    mean: Vector2<f64>,
    covariance: Matrix2<f64>,
    pub track_id: u32,
    pub last_update: f64,
    pub status: TrackStatus,
    /// Smoothed elevation of associated observations, not filtered.
    pub elevation: Option<f64>,
}

impl TrackState {
    pub fn new(
        mean: [f64; 2],
        covariance: Matrix2<f64>,
        track_id: u32,
        last_update: f64,
    ) -> Result<Self> {
        if !mean.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("state mean must be finite"));
        }
        check_covariance(&covariance)?;
        Ok(Self {
            mean: Vector2::new(wrap(mean[0]), mean[1]),
            covariance,
            track_id,
            last_update,
            status: TrackStatus::Tentative,
            elevation: None,
        })
    }

    pub fn azimuth(&self) -> f64 {
        self.mean[0]
    }

    pub fn rate(&self) -> f64 {
        self.mean[1]
    }

    pub fn mean(&self) -> &Vector2<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &Matrix2<f64> {
        &self.covariance
    }

    pub fn azimuth_std(&self) -> f64 {
        self.covariance[(0, 0)].sqrt()
    }
}

/// `F = [[1, dt], [0, 1]]`.
pub(crate) fn transition(dt: f64) -> Matrix2<f64> {
    Matrix2::new(1.0, dt, 0.0, 1.0)
}

/// `q·[[dt³/3, dt²/2], [dt²/2, dt]]`.
pub(crate) fn process_covariance(dt: f64, q: f64) -> Matrix2<f64> {
    let (d2, d3) = (dt * dt, dt * dt * dt);
    Matrix2::new(d3 / 3.0, d2 / 2.0, d2 / 2.0, dt) * q
}

/// Symmetric to 1e−12 (relative) and Cholesky-factorizable.
pub(crate) fn check_covariance(p: &Matrix2<f64>) -> Result<()> {
    let scale = p.abs().max().max(f64::MIN_POSITIVE);
    if (p[(0, 1)] - p[(1, 0)]).abs() > 1e-12 * scale {
        return Err(Error::Numerical("covariance is not symmetric".into()));
    }
    if !p.iter().all(|v| v.is_finite()) || p.cholesky().is_none() {
        return Err(Error::Numerical(
            "covariance is not positive definite".into(),
        ));
    }
    Ok(())
}

pub(crate) fn symmetrize(p: Matrix2<f64>) -> Matrix2<f64> {
    (p + p.transpose()) * 0.5
}

/// Weighted circular mean of angles.
pub(crate) fn circular_mean<'a>(pairs: impl Iterator<Item = (f64, f64)> + 'a) -> f64 {
    let (s, c) = pairs.fold((0.0, 0.0), |(s, c), (w, a)| {
        (s + w * a.sin(), c + w * a.cos())
    });
    wrap(s.atan2(c))
}

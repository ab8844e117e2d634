//! Linear Kalman filter on the circle via wrapped innovations.

use nalgebra::{Matrix2, RowVector2, Vector2};

use super::{check_covariance, process_covariance, symmetrize, transition, TrackState};
use crate::geometry::wrap;
use crate::{Error, Result};

pub fn kf_predict(state: &TrackState, dt: f64, process_noise: f64) -> Result<TrackState> {
    if !(dt >= 0.0) {
        return Err(Error::invalid(format!("dt {dt} must be ≥ 0")));
    }
    let f = transition(dt);
    let mut out = *state;
    let m = f * state.mean;
    out.mean = Vector2::new(wrap(m[0]), m[1]);
    out.covariance =
        symmetrize(f * state.covariance * f.transpose() + process_covariance(dt, process_noise));
    Ok(out)
}

/// Joseph-form update with the innovation wrapped before the gain.
pub fn kf_update(state: &TrackState, obs: f64, obs_noise_var: f64) -> Result<TrackState> {
    if !obs.is_finite() {
        return Err(Error::invalid("observation must be finite"));
    }
    if !(obs_noise_var > 0.0) {
        return Err(Error::invalid("observation variance must be > 0"));
    }
    let h = RowVector2::new(1.0, 0.0);
    let p = state.covariance;
    let s = p[(0, 0)] + obs_noise_var;
    let k = p.column(0) / s;
    let innovation = wrap(obs - state.mean[0]);
    let m = state.mean + k * innovation;
    let i_kh = Matrix2::identity() - k * h;
    let post = symmetrize(i_kh * p * i_kh.transpose() + k * k.transpose() * obs_noise_var);
    check_covariance(&post)?;
    let mut out = *state;
    out.mean = Vector2::new(wrap(m[0]), m[1]);
    out.covariance = post;
    Ok(out)
}

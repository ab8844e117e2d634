//! Bootstrap particle filter with the prior as proposal.

use std::f64::consts::TAU;

use log::warn;
use nalgebra::{Matrix2, Vector2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{circular_mean, process_covariance, NoiseParams, TrackState};
use crate::geometry::wrap;
use crate::{Error, Result};

/// Weighted particles over `[azimuth, rate]`. Weights sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    particles: Vec<Vector2<f64>>,
    weights: Vec<f64>,
    pub track_id: u32,
}

/// Outcome of one [`pf_step`].
#[derive(Debug, Clone, PartialEq)]
pub struct PfStep {
    pub set: ParticleSet,
    /// All likelihoods vanished and the weights were reset to uniform.
    pub diverged: bool,
    pub resampled: bool,
}

impl ParticleSet {
    pub fn new(particles: Vec<[f64; 2]>, weights: Vec<f64>, track_id: u32) -> Result<Self> {
        if particles.is_empty() || particles.len() != weights.len() {
            return Err(Error::invalid(
                "need ≥ 1 particle and one weight per particle",
            ));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::invalid("weights must be ≥ 0 with a positive sum"));
        }
        Ok(Self {
            particles: particles
                .iter()
                .map(|p| Vector2::new(wrap(p[0]), p[1]))
                .collect(),
            weights: weights.iter().map(|w| w / total).collect(),
            track_id,
        })
    }

    /// `count` equally weighted draws from `N(mean, cov)`.
    pub fn from_gaussian(
        mean: [f64; 2],
        cov: &Matrix2<f64>,
        count: usize,
        track_id: u32,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let l = cov
            .cholesky()
            .ok_or_else(|| Error::Numerical("initial covariance not positive definite".into()))?
            .l();
        let m = Vector2::new(mean[0], mean[1]);
        let particles = (0..count)
            .map(|_| {
                let z = Vector2::new(StandardNormal.sample(rng), StandardNormal.sample(rng));
                let p = m + l * z;
                [p[0], p[1]]
            })
            .collect();
        Self::new(particles, vec![1.0; count], track_id)
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn particles(&self) -> &[Vector2<f64>] {
        &self.particles
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn effective_sample_size(&self) -> f64 {
        1.0 / self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    pub fn circular_mean(&self) -> f64 {
        circular_mean(
            self.weights
                .iter()
                .copied()
                .zip(self.particles.iter().map(|p| p[0])),
        )
    }

    /// Gaussian summary: circular mean azimuth, mean rate, and covariance of
    /// wrapped deviations from that mean.
    pub fn summary(&self, track_id: u32, last_update: f64) -> Result<TrackState> {
        let az = self.circular_mean();
        let rate: f64 = self
            .weights
            .iter()
            .zip(&self.particles)
            .map(|(w, p)| w * p[1])
            .sum();
        let mut cov = Matrix2::zeros();
        for (w, p) in self.weights.iter().zip(&self.particles) {
            let d = Vector2::new(wrap(p[0] - az), p[1] - rate);
            cov += d * d.transpose() * *w;
        }
        cov += Matrix2::identity() * 1e-12;
        TrackState::new([az, rate], cov, track_id, last_update)
    }
}

/// Propagates every particle through the constant-velocity model with
/// sampled process noise.
pub fn pf_predict(
    ps: &ParticleSet,
    dt: f64,
    process_noise: f64,
    rng: &mut impl Rng,
) -> Result<ParticleSet> {
    if !(dt >= 0.0) {
        return Err(Error::invalid(format!("dt {dt} must be ≥ 0")));
    }
    let q = process_covariance(dt, process_noise);
    // closed-form Cholesky of q; zero when dt or the intensity vanishes
    let l00 = q[(0, 0)].sqrt();
    let l10 = if l00 > 0.0 { q[(1, 0)] / l00 } else { 0.0 };
    let l11 = (q[(1, 1)] - l10 * l10).max(0.0).sqrt();
    let mut out = ps.clone();
    for p in out.particles.iter_mut() {
        let (z0, z1): (f64, f64) = (StandardNormal.sample(rng), StandardNormal.sample(rng));
        let az = p[0] + dt * p[1] + l00 * z0;
        p[1] += l10 * z0 + l11 * z1;
        p[0] = wrap(az);
    }
    Ok(out)
}

/// Reweights by the wrapped-Gaussian likelihood of the innovation and
/// resamples systematically when the effective sample size drops below half.
pub fn pf_update(ps: &ParticleSet, obs: f64, obs_std: f64, rng: &mut impl Rng) -> Result<PfStep> {
    if !obs.is_finite() || !(obs_std > 0.0) {
        return Err(Error::invalid("observation must be finite and its std > 0"));
    }
    let var = obs_std * obs_std;
    let mut set = ps.clone();
    for (w, p) in set.weights.iter_mut().zip(&set.particles) {
        let nu = wrap(obs - p[0]);
        let lik: f64 = [-TAU, 0.0, TAU]
            .iter()
            .map(|s| (-(nu + s).powi(2) / (2.0 * var)).exp())
            .sum();
        *w *= lik;
    }
    let total: f64 = set.weights.iter().sum();
    let diverged = !(total > 0.0) || !total.is_finite();
    if diverged {
        warn!(
            "track {}: all particle weights vanished, resetting to uniform",
            ps.track_id
        );
        let u = 1.0 / set.len() as f64;
        set.weights.iter_mut().for_each(|w| *w = u);
    } else {
        set.weights.iter_mut().for_each(|w| *w /= total);
    }
    let resampled = set.effective_sample_size() < set.len() as f64 / 2.0;
    if resampled {
        systematic_resample(&mut set, rng);
    }
    Ok(PfStep {
        set,
        diverged,
        resampled,
    })
}

pub fn pf_step(
    ps: &ParticleSet,
    obs: f64,
    dt: f64,
    params: NoiseParams,
    rng: &mut impl Rng,
) -> Result<PfStep> {
    let predicted = pf_predict(ps, dt, params.process_noise, rng)?;
    pf_update(&predicted, obs, params.obs_std, rng)
}

fn systematic_resample(set: &mut ParticleSet, rng: &mut impl Rng) {
    let n = set.len();
    let step = 1.0 / n as f64;
    let mut u = rng.random::<f64>() * step;
    let mut cum = set.weights[0];
    let mut i = 0;
    let mut picked = Vec::with_capacity(n);
    for _ in 0..n {
        while u > cum && i + 1 < n {
            i += 1;
            cum += set.weights[i];
        }
        picked.push(set.particles[i]);
        u += step;
    }
    set.particles = picked;
    set.weights = vec![step; n];
}

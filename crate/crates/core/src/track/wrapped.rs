//! Wrapped Kalman filter: a Gaussian mixture over the unwrapped azimuth,
//! each component updated against the hypotheses `obs + {−2π, 0, 2π}`.

use std::f64::consts::TAU;

use nalgebra::{Matrix2, RowVector2, Vector2};

use super::{check_covariance, circular_mean, process_covariance, symmetrize, transition};
use crate::geometry::wrap;
use crate::{Error, Result};

/// Components whose normalized weight falls below this are dropped.
pub const PRUNE_WEIGHT: f64 = 1e-4;
/// Components closer than this Mahalanobis distance are merged.
pub const MERGE_DISTANCE: f64 = 0.5;
pub const DEFAULT_MIXTURE_CAP: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: Vector2<f64>,
    pub covariance: Matrix2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WrappedMixture {
    components: Vec<MixtureComponent>,
    cap: usize,
}

impl WrappedMixture {
    /// A single Gaussian component.
    pub fn new(mean: [f64; 2], covariance: Matrix2<f64>, cap: usize) -> Result<Self> {
        Self::from_components(
            vec![MixtureComponent {
                weight: 1.0,
                mean: Vector2::new(wrap(mean[0]), mean[1]),
                covariance,
            }],
            cap,
        )
    }

    pub fn from_components(components: Vec<MixtureComponent>, cap: usize) -> Result<Self> {
        if cap == 0 {
            return Err(Error::invalid("mixture cap must be ≥ 1"));
        }
        if components.is_empty() {
            return Err(Error::invalid("mixture needs a component"));
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if !(total > 0.0) || components.iter().any(|c| !(c.weight >= 0.0)) {
            return Err(Error::invalid(
                "mixture weights must be ≥ 0 with a positive sum",
            ));
        }
        for c in &components {
            check_covariance(&c.covariance)?;
        }
        let components = components
            .into_iter()
            .map(|c| MixtureComponent {
                weight: c.weight / total,
                ..c
            })
            .collect();
        Ok(Self { components, cap })
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    /// The heaviest component.
    pub fn dominant(&self) -> &MixtureComponent {
        self.components
            .iter()
            .max_by(|a, b| a.weight.total_cmp(&b.weight))
            .expect("nonempty mixture")
    }

    pub fn circular_mean(&self) -> f64 {
        circular_mean(self.components.iter().map(|c| (c.weight, c.mean[0])))
    }
}

pub fn wrapped_kf_predict(
    mix: &WrappedMixture,
    dt: f64,
    process_noise: f64,
) -> Result<WrappedMixture> {
    if !(dt >= 0.0) {
        return Err(Error::invalid(format!("dt {dt} must be ≥ 0")));
    }
    let f = transition(dt);
    let q = process_covariance(dt, process_noise);
    let components = mix
        .components
        .iter()
        .map(|c| {
            let m = f * c.mean;
            MixtureComponent {
                weight: c.weight,
                mean: Vector2::new(wrap(m[0]), m[1]),
                covariance: symmetrize(f * c.covariance * f.transpose() + q),
            }
        })
        .collect();
    Ok(WrappedMixture {
        components,
        cap: mix.cap,
    })
}

pub fn wrapped_kf_update(
    mix: &WrappedMixture,
    obs: f64,
    obs_noise_var: f64,
) -> Result<WrappedMixture> {
    if !obs.is_finite() {
        return Err(Error::invalid("observation must be finite"));
    }
    if !(obs_noise_var > 0.0) {
        return Err(Error::invalid("observation variance must be > 0"));
    }
    let obs = wrap(obs);
    let h = RowVector2::new(1.0, 0.0);
    let mut hyps = Vec::with_capacity(3 * mix.components.len());
    let mut log_w = Vec::with_capacity(hyps.capacity());
    for c in &mix.components {
        if c.weight <= 0.0 {
            continue;
        }
        let p = c.covariance;
        let s = p[(0, 0)] + obs_noise_var;
        let k = p.column(0) / s;
        let i_kh = Matrix2::identity() - k * h;
        let post = symmetrize(i_kh * p * i_kh.transpose() + k * k.transpose() * obs_noise_var);
        check_covariance(&post)?;
        for shift in [-TAU, 0.0, TAU] {
            let nu = obs + shift - c.mean[0];
            let m = c.mean + k * nu;
            log_w.push(c.weight.ln() - 0.5 * (nu * nu / s + s.ln()));
            hyps.push(MixtureComponent {
                weight: 0.0,
                mean: Vector2::new(wrap(m[0]), m[1]),
                covariance: post,
            });
        }
    }
    let top = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(Error::Numerical("mixture weights vanished".into()));
    }
    for (c, lw) in hyps.iter_mut().zip(&log_w) {
        c.weight = (lw - top).exp();
    }
    Ok(WrappedMixture {
        components: reduce(hyps, mix.cap),
        cap: mix.cap,
    })
}

/// Prune, merge nearby components around the heaviest, then cap.
fn reduce(mut comps: Vec<MixtureComponent>, cap: usize) -> Vec<MixtureComponent> {
    normalize(&mut comps);
    comps.retain(|c| c.weight >= PRUNE_WEIGHT);
    comps.sort_by(|a, b| b.weight.total_cmp(&a.weight));
    let mut merged = Vec::new();
    while !comps.is_empty() {
        let lead = comps[0];
        let inv = lead.covariance.try_inverse().unwrap_or_else(Matrix2::zeros);
        let delta = |c: &MixtureComponent| {
            Vector2::new(wrap(c.mean[0] - lead.mean[0]), c.mean[1] - lead.mean[1])
        };
        let (group, rest): (Vec<_>, Vec<_>) = comps
            .into_iter()
            .partition(|c| (delta(c).transpose() * inv * delta(c))[0].sqrt() < MERGE_DISTANCE);
        let w: f64 = group.iter().map(|c| c.weight).sum();
        let shift: Vector2<f64> = group
            .iter()
            .map(|c| delta(c) * c.weight)
            .sum::<Vector2<f64>>()
            / w;
        let mut cov = Matrix2::zeros();
        for c in &group {
            let d = delta(c) - shift;
            cov += (c.covariance + d * d.transpose()) * c.weight;
        }
        merged.push(MixtureComponent {
            weight: w,
            mean: Vector2::new(wrap(lead.mean[0] + shift[0]), lead.mean[1] + shift[1]),
            covariance: symmetrize(cov / w),
        });
        comps = rest;
    }
    merged.sort_by(|a, b| b.weight.total_cmp(&a.weight));
    merged.truncate(cap);
    normalize(&mut merged);
    merged
}

fn normalize(comps: &mut [MixtureComponent]) {
    let total: f64 = comps.iter().map(|c| c.weight).sum();
    comps.iter_mut().for_each(|c| c.weight /= total);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::track::{kf_predict, kf_update, TrackState};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn cov(a: f64) -> Matrix2<f64> {
        Matrix2::new(a, 0.0, 0.0, 0.01)
    }

    #[test]
    fn tight_prior_stays_single() {
        let m = WrappedMixture::new([0.0, 0.0], cov(1e-3), 8).unwrap();
        let u = wrapped_kf_update(&m, 0.0, 1e-3).unwrap();
        assert_eq!(u.components().len(), 1);
        assert!(u.dominant().mean[0].abs() < 1e-12);
    }

    #[test]
    fn crosses_the_wrap() {
        let eps = 0.02;
        let m = WrappedMixture::new([PI - eps, 0.0], cov(1e-3), 8).unwrap();
        let u = wrapped_kf_update(&m, -PI + eps, 1e-3).unwrap();
        let c = u.circular_mean();
        assert!(PI - c.abs() < 2.0 * eps, "{c}");
        assert!(u.dominant().weight > 0.99);
    }

    #[test]
    fn agrees_with_plain_kalman_away_from_wrap() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut kf = TrackState::new([0.3, 0.1], cov(1e-3), 1, 0.0).unwrap();
        let mut wk = WrappedMixture::new([0.3, 0.1], cov(1e-3), 8).unwrap();
        for _ in 0..200 {
            kf = kf_predict(&kf, 0.1, 0.25).unwrap();
            wk = wrapped_kf_predict(&wk, 0.1, 0.25).unwrap();
            let obs = kf.azimuth() + rng.random_range(-0.05..0.05);
            kf = kf_update(&kf, obs, 3e-3).unwrap();
            wk = wrapped_kf_update(&wk, obs, 3e-3).unwrap();
            if (kf.azimuth().abs() - PI).abs() > 5.0 * kf.azimuth_std() {
                assert!((kf.azimuth() - wk.dominant().mean[0]).abs() < 1e-6);
            }
        }
    }

    proptest! {
        #[test]
        fn component_count_is_capped(seed in any::<u64>(), cap in 1usize..=8) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut m = WrappedMixture::new([0.0, 0.0], cov(4.0), cap).unwrap();
            for _ in 0..100 {
                m = wrapped_kf_predict(&m, 0.1, 1.0).unwrap();
                m = wrapped_kf_update(&m, rng.random_range(-PI..PI), rng.random_range(0.01..3.0)).unwrap();
                prop_assert!(m.components().len() <= cap);
                let total: f64 = m.components().iter().map(|c| c.weight).sum();
                prop_assert!((total - 1.0).abs() < 1e-9);
                for c in m.components() {
                    prop_assert!(c.covariance.cholesky().is_some());
                    prop_assert!((-PI..PI).contains(&c.mean[0]));
                }
            }
        }
    }
}

//! Track initiation, gating, association and termination.
//!
//! Estimates sharing a timestamp form one frame. Each frame is handled in
//! this order:
//! 1. Tracks silent for longer than the miss timeout are terminated.
//! 2. Every live track is predicted to the frame time.
//! 3. Confirmed tracks, then tentative ones, are associated by Munkres on the
//!    normalized innovation `|ν|/√S`. A pair is admissible within
//!    `gate_sigma` standard deviations and never beyond `max_gate_deg`.
//! 4. Leftover estimates open tentative tracks.
//!
//! A tentative track is confirmed once it collects `confirm_hits` hits in
//! its first `confirm_window` frames. Otherwise it is dropped. Ids are handed
//! out at confirmation and never reused.

use std::f64::consts::PI;

use log::warn;
use nalgebra::Matrix2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    kf_predict, kf_update, pf_predict, pf_update, wrapped_kf_predict, wrapped_kf_update,
    NoiseParams, ParticleSet, TrackState, TrackStatus, WrappedMixture,
};
use crate::evaluate::gated_assignment;
use crate::geometry::{wrap, Doa};
use crate::localize::DoaEstimate;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrackerKind {
    #[default]
    Kalman,
    WrappedKalman,
    Particle,
}

impl std::str::FromStr for TrackerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kalman" | "kf" => Ok(Self::Kalman),
            "wrapped-kalman" | "wrapped" | "wkf" => Ok(Self::WrappedKalman),
            "particle" | "pf" => Ok(Self::Particle),
            other => Err(Error::invalid(format!("unknown tracker '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LifecycleConfig {
    pub tracker: TrackerKind,
    pub noise: NoiseParams,
    pub confirm_hits: usize,
    pub confirm_window: usize,
    pub gate_sigma: f64,
    pub max_gate_deg: f64,
    pub miss_timeout_s: f64,
    /// Prior std of the azimuth rate of a new track, rad/s.
    pub initial_rate_std: f64,
    pub particles: usize,
    pub mixture_cap: usize,
    pub seed: u64,
}

impl Default for LifecycleConfig {
    fn default() -> Self {
        Self {
            tracker: TrackerKind::Kalman,
            noise: NoiseParams::default(),
            confirm_hits: 3,
            confirm_window: 5,
            gate_sigma: 3.0,
            max_gate_deg: 30.0,
            miss_timeout_s: 0.5,
            initial_rate_std: 0.3,
            particles: 1000,
            mixture_cap: super::wrapped::DEFAULT_MIXTURE_CAP,
            seed: 0,
        }
    }
}

impl LifecycleConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::invalid(m.to_string()));
        if self.confirm_hits == 0 || self.confirm_hits > self.confirm_window {
            return bad("need 1 ≤ confirm_hits ≤ confirm_window");
        }
        if !(self.gate_sigma > 0.0 && self.max_gate_deg > 0.0) {
            return bad("gates must be > 0");
        }
        if !(self.miss_timeout_s >= 0.0) {
            return bad("miss timeout must be ≥ 0");
        }
        if !(self.noise.obs_std > 0.0
            && self.noise.process_noise >= 0.0
            && self.initial_rate_std > 0.0)
        {
            return bad("noise parameters out of range");
        }
        if self.particles == 0 || self.mixture_cap == 0 {
            return bad("particle count and mixture cap must be ≥ 1");
        }
        Ok(())
    }
}

/// States of one confirmed track on the evaluation clock.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u32,
    pub states: Vec<(f64, TrackState)>,
}

enum Filter {
    Kalman(TrackState),
    Wrapped(WrappedMixture),
    Particle(ParticleSet),
}

struct Live {
    filter: Filter,
    time: f64,
    frames: usize,
    hits: usize,
    id: Option<u32>,
    confirmed_at: f64,
    last_update: f64,
    elevation: Option<f64>,
    snapshots: Vec<(f64, TrackState)>,
}

impl Live {
    fn summary(&self) -> Result<TrackState> {
        let mut s = match &self.filter {
            Filter::Kalman(s) => *s,
            Filter::Wrapped(m) => {
                let c = m.dominant();
                TrackState::new([c.mean[0], c.mean[1]], c.covariance, 0, self.last_update)?
            }
            Filter::Particle(p) => p.summary(0, self.last_update)?,
        };
        s.track_id = self.id.unwrap_or(0);
        s.last_update = self.last_update;
        s.elevation = self.elevation;
        s.status = if self.id.is_some() {
            TrackStatus::Confirmed
        } else {
            TrackStatus::Tentative
        };
        Ok(s)
    }

    fn predict(&mut self, t: f64, cfg: &LifecycleConfig, rng: &mut ChaCha8Rng) -> Result<()> {
        let dt = t - self.time;
        let q = cfg.noise.process_noise;
        self.filter = match &self.filter {
            Filter::Kalman(s) => Filter::Kalman(kf_predict(s, dt, q)?),
            Filter::Wrapped(m) => Filter::Wrapped(wrapped_kf_predict(m, dt, q)?),
            Filter::Particle(p) => Filter::Particle(pf_predict(p, dt, q, rng)?),
        };
        self.time = t;
        Ok(())
    }

    fn update(
        &mut self,
        e: &DoaEstimate,
        cfg: &LifecycleConfig,
        rng: &mut ChaCha8Rng,
    ) -> Result<()> {
        let obs = e.doa.azimuth();
        let r = cfg.noise.obs_var();
        self.filter = match &self.filter {
            Filter::Kalman(s) => Filter::Kalman(kf_update(s, obs, r)?),
            Filter::Wrapped(m) => Filter::Wrapped(wrapped_kf_update(m, obs, r)?),
            Filter::Particle(p) => {
                let step = pf_update(p, obs, cfg.noise.obs_std, rng)?;
                if step.diverged {
                    return Err(Error::Numerical("particle weights diverged".into()));
                }
                Filter::Particle(step.set)
            }
        };
        let el = e.doa.elevation();
        self.elevation = Some(self.elevation.map_or(el, |prev| prev + 0.5 * (el - prev)));
        self.last_update = e.timestamp;
        Ok(())
    }
}

fn spawn(e: &DoaEstimate, cfg: &LifecycleConfig, rng: &mut ChaCha8Rng) -> Result<Live> {
    let cov = Matrix2::new(cfg.noise.obs_var(), 0.0, 0.0, cfg.initial_rate_std.powi(2));
    let mean = [e.doa.azimuth(), 0.0];
    let filter = match cfg.tracker {
        TrackerKind::Kalman => Filter::Kalman(TrackState::new(mean, cov, 0, e.timestamp)?),
        TrackerKind::WrappedKalman => {
            Filter::Wrapped(WrappedMixture::new(mean, cov, cfg.mixture_cap)?)
        }
        TrackerKind::Particle => Filter::Particle(ParticleSet::from_gaussian(
            mean,
            &cov,
            cfg.particles,
            0,
            rng,
        )?),
    };
    Ok(Live {
        filter,
        time: e.timestamp,
        frames: 1,
        hits: 1,
        id: None,
        confirmed_at: f64::NAN,
        last_update: e.timestamp,
        elevation: Some(e.doa.elevation()),
        snapshots: Vec::new(),
    })
}

/// Associates `estimates` with the tracks in `group`; returns `(track, estimate)` pairs.
fn associate(
    live: &[Live],
    group: &[usize],
    estimates: &[&DoaEstimate],
    free: &[usize],
    cfg: &LifecycleConfig,
) -> Result<Vec<(usize, usize)>> {
    let r = cfg.noise.obs_var();
    let max_gate = cfg.max_gate_deg.to_radians();
    let reject = cfg.gate_sigma + 1.0;
    let mut cost = Vec::with_capacity(group.len());
    for &i in group {
        let s = live[i].summary()?;
        let sd = (s.covariance()[(0, 0)] + r).sqrt();
        let gate = (cfg.gate_sigma * sd).min(max_gate);
        cost.push(
            free.iter()
                .map(|&j| {
                    let nu = wrap(estimates[j].doa.azimuth() - s.azimuth()).abs();
                    if nu <= gate {
                        nu / sd
                    } else {
                        reject
                    }
                })
                .collect::<Vec<_>>(),
        );
    }
    Ok(gated_assignment(&cost, cfg.gate_sigma)?
        .into_iter()
        .map(|(a, b)| (group[a], free[b]))
        .collect())
}

/// Runs initiation, association and termination over a time-ordered
/// estimate stream and emits confirmed-track states on `clock`.
///
/// Each confirmed track reports a state at every clock tick from its
/// confirmation until its termination (one miss timeout after its last
/// update), predicted forward from the latest filtered state. Invalid
/// configurations and unordered streams yield no tracks.
pub fn track_lifecycle(
    estimates: &[DoaEstimate],
    clock: &[f64],
    config: &LifecycleConfig,
) -> Vec<Track> {
    if let Err(e) = config.validate() {
        warn!("tracker disabled: {e}");
        return Vec::new();
    }
    if estimates
        .windows(2)
        .any(|w| !(w[1].timestamp >= w[0].timestamp))
    {
        warn!("tracker disabled: estimate stream is not time-ordered");
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut live: Vec<Live> = Vec::new();
    let mut finished: Vec<(Live, f64)> = Vec::new();
    let mut next_id = 1u32;

    let mut start = 0;
    while start < estimates.len() {
        let t = estimates[start].timestamp;
        let end = start
            + estimates[start..]
                .iter()
                .take_while(|e| e.timestamp - t <= 1e-9)
                .count();
        let frame: Vec<&DoaEstimate> = estimates[start..end].iter().collect();
        start = end;

        // terminate silent tracks
        let mut k = 0;
        while k < live.len() {
            if t - live[k].last_update > config.miss_timeout_s {
                let tr = live.remove(k);
                if tr.id.is_some() {
                    let stop = tr.last_update + config.miss_timeout_s;
                    finished.push((tr, stop));
                }
            } else {
                k += 1;
            }
        }

        let mut failed = Vec::new();
        for (i, tr) in live.iter_mut().enumerate() {
            if let Err(e) = tr.predict(t, config, &mut rng) {
                warn!("dropping track after prediction failure: {e}");
                failed.push(i);
            }
        }
        drop_failed(&mut live, &mut finished, failed);

        let confirmed: Vec<usize> = (0..live.len()).filter(|&i| live[i].id.is_some()).collect();
        let tentative: Vec<usize> = (0..live.len()).filter(|&i| live[i].id.is_none()).collect();
        let mut free: Vec<usize> = (0..frame.len()).collect();
        let mut updated = vec![false; live.len()];
        let mut failed = Vec::new();
        for group in [&confirmed, &tentative] {
            let pairs = match associate(&live, group, &frame, &free, config) {
                Ok(p) => p,
                Err(e) => {
                    warn!("association failed: {e}");
                    Vec::new()
                }
            };
            for (i, j) in pairs {
                free.retain(|&f| f != j);
                updated[i] = true;
                if let Err(e) = live[i].update(frame[j], config, &mut rng) {
                    warn!("dropping track after update failure: {e}");
                    failed.push(i);
                }
            }
        }

        for (i, tr) in live.iter_mut().enumerate() {
            if tr.id.is_none() {
                tr.frames += 1;
                tr.hits += updated[i] as usize;
                if tr.hits >= config.confirm_hits {
                    tr.id = Some(next_id);
                    tr.confirmed_at = t;
                    next_id += 1;
                }
            }
            if tr.id.is_some() {
                match tr.summary() {
                    Ok(s) => tr.snapshots.push((t, s)),
                    Err(_) => failed.push(i),
                }
            }
        }
        drop_failed(&mut live, &mut finished, failed);
        live.retain(|tr| tr.id.is_some() || tr.frames < config.confirm_window);

        for &j in &free {
            match spawn(frame[j], config, &mut rng) {
                Ok(tr) => live.push(tr),
                Err(e) => warn!("could not open track: {e}"),
            }
        }
        // a single-frame confirmation rule confirms on creation
        for tr in live
            .iter_mut()
            .filter(|tr| tr.id.is_none() && tr.hits >= config.confirm_hits)
        {
            tr.id = Some(next_id);
            tr.confirmed_at = t;
            next_id += 1;
            if let Ok(s) = tr.summary() {
                tr.snapshots.push((t, s));
            }
        }
    }
    for tr in live.into_iter().filter(|tr| tr.id.is_some()) {
        let stop = tr.last_update + config.miss_timeout_s;
        finished.push((tr, stop));
    }

    let mut tracks: Vec<Track> = finished
        .into_iter()
        .map(|(tr, stop)| emit(&tr, stop, clock, config))
        .filter(|t| !t.states.is_empty())
        .collect();
    tracks.sort_by_key(|t| t.id);
    tracks
}

/// Numerically failed tracks end at their last update.
fn drop_failed(live: &mut Vec<Live>, finished: &mut Vec<(Live, f64)>, mut failed: Vec<usize>) {
    failed.sort_unstable();
    failed.dedup();
    for &i in failed.iter().rev() {
        let tr = live.remove(i);
        if tr.id.is_some() {
            let stop = tr.last_update;
            finished.push((tr, stop));
        }
    }
}

fn emit(tr: &Live, stop: f64, clock: &[f64], config: &LifecycleConfig) -> Track {
    let id = tr.id.expect("confirmed");
    let mut states = Vec::new();
    let mut k = 0;
    for &tick in clock {
        if tick < tr.confirmed_at - 1e-9 || tick > stop + 1e-9 {
            continue;
        }
        while k + 1 < tr.snapshots.len() && tr.snapshots[k + 1].0 <= tick + 1e-9 {
            k += 1;
        }
        let Some(&(t0, base)) = tr.snapshots.get(k) else {
            continue;
        };
        let Ok(mut s) = kf_predict(&base, (tick - t0).max(0.0), config.noise.process_noise) else {
            continue;
        };
        s.status = TrackStatus::Confirmed;
        states.push((tick, s));
    }
    if let Some(last) = states.last_mut() {
        last.1.status = TrackStatus::Terminated;
    }
    Track { id, states }
}

/// Flattens tracks into time-ordered estimates labelled by track id.
pub fn tracks_to_estimates(tracks: &[Track]) -> Vec<DoaEstimate> {
    let mut out: Vec<DoaEstimate> = tracks
        .iter()
        .flat_map(|t| {
            t.states.iter().map(move |(time, s)| DoaEstimate {
                timestamp: *time,
                doa: Doa::new(s.azimuth(), s.elevation.unwrap_or(PI / 2.0)),
                source_id: t.id,
                score: 1.0 / s.azimuth_std().max(1e-12),
            })
        })
        .collect();
    out.sort_by(|a, b| {
        a.timestamp
            .total_cmp(&b.timestamp)
            .then(a.source_id.cmp(&b.source_id))
    });
    out
}

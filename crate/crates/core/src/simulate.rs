//! Free-field scene synthesis with exactly known ground truth.
//!
//! Each source signal reaches microphone `m` as
//! `s(n − D_m(n)) / max(d_m(n), 0.1 m)` with `D_m = fs·d_m/c`. The distance
//! is taken at the reception instant, so moving sources carry the Doppler
//! shift that a time-varying delay implies and nothing else.

use std::f64::consts::PI;
use std::sync::OnceLock;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::evaluate::{GroundTruth, VapTable};
use crate::geometry::{
    ArrayGeometry, Pose, Trajectory, Vec3, GROUND_TRUTH_RATE_HZ, SPEED_OF_SOUND,
};
use crate::sigproc::{MultichannelAudio, C64, DEFAULT_SAMPLE_RATE_HZ};
use crate::{Error, Result};

/// Closest a source may come to any microphone.
pub const MIN_DISTANCE_M: f64 = 0.1;
pub const RAMP_S: f64 = 0.01;
/// Interpolator length; taps run from `-HALF_TAPS + 1` to `HALF_TAPS`.
pub const SINC_TAPS: usize = 32;
const HALF_TAPS: i64 = SINC_TAPS as i64 / 2;
const PHASES: usize = 4096;
/// Distances are evaluated every this many samples and interpolated between.
const DISTANCE_STEP: usize = 16;
pub const PCM_BITS: u32 = 24;
pub const DEFAULT_DURATION_S: f64 = 10.0;
pub const DEFAULT_SNR_DB: f64 = 20.0;
pub const DEFAULT_NOISE_RMS: f64 = 0.005;
pub const SPEECH_BAND_HZ: (f64, f64) = (100.0, 4000.0);
/// Speed bounds of preset motion, m/s.
pub const MAX_SOURCE_SPEED: f64 = 1.2;
pub const MAX_ARRAY_SPEED: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    None,
    #[default]
    White,
    Pink,
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "white" => Ok(Self::White),
            "pink" => Ok(Self::Pink),
            other => Err(Error::invalid(format!("unknown noise kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalKind {
    /// Unit-variance Gaussian noise.
    White,
    /// Amplitude-modulated noise limited to the speech band.
    #[default]
    Speech,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceConfig {
    pub signal: SignalKind,
    /// Global source position; rotations are ignored.
    pub trajectory: Trajectory,
    /// Emission-time activity periods, non-overlapping.
    pub vaps: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub duration: f64,
    pub array: ArrayGeometry,
    pub array_trajectory: Trajectory,
    pub sources: Vec<SourceConfig>,
    /// Per-source level relative to `noise_rms`, measured over the source's
    /// active samples at the microphone nearest the array centroid. `None`
    /// emits every source at unit RMS so that spreading loss stays visible.
    pub snr_db: Option<f64>,
    pub noise: NoiseKind,
    /// Per-channel RMS of the ambient noise, also the SNR reference level.
    pub noise_rms: f64,
    pub seed: u64,
    pub sample_rate_hz: f64,
    pub speed_of_sound: f64,
    /// Task label carried into exported metadata.
    pub task: Option<u8>,
}

impl SceneConfig {
    /// Static array at the origin with no sources and default levels.
    pub fn new(array: ArrayGeometry, duration: f64, seed: u64) -> Result<Self> {
        let array_trajectory =
            Trajectory::constant(&Pose::identity(0.0), duration, GROUND_TRUTH_RATE_HZ)?;
        Ok(Self {
            duration,
            array,
            array_trajectory,
            sources: Vec::new(),
            snr_db: Some(DEFAULT_SNR_DB),
            noise: NoiseKind::White,
            noise_rms: DEFAULT_NOISE_RMS,
            seed,
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            speed_of_sound: SPEED_OF_SOUND,
            task: None,
        })
    }

    pub fn sample_count(&self) -> usize {
        (self.duration * self.sample_rate_hz).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::invalid("scene duration must be > 0"));
        }
        if !(self.sample_rate_hz > 0.0 && self.speed_of_sound > 0.0) {
            return Err(Error::invalid("sample rate and speed of sound must be > 0"));
        }
        if !(self.noise_rms > 0.0 && self.noise_rms < 1.0) {
            return Err(Error::invalid("noise RMS must lie in (0, 1)"));
        }
        if let Some(snr) = self.snr_db {
            if !snr.is_finite() {
                return Err(Error::invalid("SNR must be finite"));
            }
        }
        let covers =
            |t: &Trajectory| t.start_time() <= 1e-9 && t.end_time() >= self.duration - 1e-9;
        if !covers(&self.array_trajectory) {
            return Err(Error::invalid("array trajectory does not cover the scene"));
        }
        for (n, src) in self.sources.iter().enumerate() {
            if !covers(&src.trajectory) {
                return Err(Error::invalid(format!(
                    "trajectory of source {} does not cover the scene",
                    n + 1
                )));
            }
            for (k, &(a, b)) in src.vaps.iter().enumerate() {
                if !(0.0 <= a && a < b && b <= self.duration + 1e-9) {
                    return Err(Error::invalid(format!(
                        "VAP ({a}, {b}) of source {} outside the scene",
                        n + 1
                    )));
                }
                if k > 0 && a < src.vaps[k - 1].1 {
                    return Err(Error::invalid(format!(
                        "VAPs of source {} overlap or are unordered",
                        n + 1
                    )));
                }
            }
            for ps in src.trajectory.samples() {
                let pose = self
                    .array_trajectory
                    .interpolate(ps.timestamp().clamp(0.0, self.duration))?;
                for m in 0..self.array.mic_count() {
                    let d = (ps.translation() - pose.local_to_global(&self.array.mic(m))).norm();
                    if d < MIN_DISTANCE_M {
                        return Err(Error::invalid(format!(
                            "source {} passes {d:.3} m from microphone {} at {} s",
                            n + 1,
                            m + 1,
                            ps.timestamp()
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Synthesized audio plus the ground truth it was rendered from.
#[derive(Debug, Clone)]
pub struct Scene {
    pub audio: MultichannelAudio,
    pub sources: Vec<Trajectory>,
    pub vaps: VapTable,
    pub array_trajectory: Trajectory,
    pub config: SceneConfig,
}

impl Scene {
    /// Evaluation clock at 120 Hz over the scene.
    pub fn clock(&self) -> Vec<f64> {
        evaluation_clock(self.config.duration)
    }

    /// Truth on the evaluation clock; `align` shifts VAPs by propagation time.
    pub fn ground_truth(&self, align: bool) -> Result<GroundTruth> {
        GroundTruth::from_trajectories(
            &self.clock(),
            &self.array_trajectory,
            &self.sources,
            &self.vaps,
            self.config.speed_of_sound,
            align,
        )
    }
}

/// Ticks `k/120` that lie inside `[0, duration]`.
pub fn evaluation_clock(duration: f64) -> Vec<f64> {
    let n = (duration * GROUND_TRUTH_RATE_HZ + 1e-9).floor() as usize;
    (0..=n).map(|k| k as f64 / GROUND_TRUTH_RATE_HZ).collect()
}

/// Renders the scene. Output samples are quantized to 24-bit PCM levels so
/// that a WAV export round-trips exactly.
pub fn synthesize(config: &SceneConfig) -> Result<Scene> {
    config.validate()?;
    let n = config.sample_count();
    let fs = config.sample_rate_hz;
    let mics = config.array.mic_count();
    let reference = nearest_to_centroid(&config.array);

    let mut mix = vec![vec![0.0; n]; mics];
    for (k, src) in config.sources.iter().enumerate() {
        let mut rng = stream_rng(config.seed, 1 + k as u64);
        let mut signal = match src.signal {
            SignalKind::White => white(n, &mut rng),
            SignalKind::Speech => speech(n, fs, &mut rng),
        };
        for (i, x) in signal.iter_mut().enumerate() {
            *x *= envelope(&src.vaps, i as f64 / fs);
        }
        let mut received = Vec::with_capacity(mics);
        for m in 0..mics {
            received.push(propagate(&signal, config, &src.trajectory, m)?);
        }
        let gain = match config.snr_db {
            Some(snr) => {
                let active: Vec<f64> = (0..n)
                    .filter(|&i| in_vaps(&src.vaps, i as f64 / fs))
                    .map(|i| received[reference][i])
                    .collect();
                let level = rms(&active);
                if level > 0.0 {
                    config.noise_rms * 10f64.powf(snr / 20.0) / level
                } else {
                    0.0
                }
            }
            None => 1.0,
        };
        for (out, ch) in mix.iter_mut().zip(&received) {
            for (o, x) in out.iter_mut().zip(ch) {
                *o += gain * x;
            }
        }
    }

    if config.noise != NoiseKind::None {
        let mut rng = stream_rng(config.seed, 0);
        for out in mix.iter_mut() {
            let mut noise = match config.noise {
                NoiseKind::Pink => pink(n, &mut rng),
                _ => white(n, &mut rng),
            };
            let scale = config.noise_rms / rms(&noise).max(f64::MIN_POSITIVE);
            noise.iter_mut().for_each(|x| *x *= scale);
            for (o, x) in out.iter_mut().zip(&noise) {
                *o += x;
            }
        }
    }

    let mut clipped = 0usize;
    for ch in mix.iter_mut() {
        for x in ch.iter_mut() {
            let (q, c) = quantize(*x);
            *x = q;
            clipped += c as usize;
        }
    }
    if clipped > 0 {
        warn!("{clipped} samples clipped while quantizing the scene");
    }

    let vaps = VapTable::new(config.sources.iter().map(|s| s.vaps.clone()).collect())?;
    Ok(Scene {
        audio: MultichannelAudio::new(mix, fs, 0.0)?,
        sources: config
            .sources
            .iter()
            .map(|s| s.trajectory.clone())
            .collect(),
        vaps,
        array_trajectory: config.array_trajectory.clone(),
        config: config.clone(),
    })
}

/// Rounds to the nearest 24-bit level; reports whether the value clipped.
pub fn quantize(x: f64) -> (f64, bool) {
    let full = (1i64 << (PCM_BITS - 1)) as f64;
    let q = (x * full).round();
    let c = q.clamp(-full, full - 1.0);
    (c / full, c != q)
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn nearest_to_centroid(array: &ArrayGeometry) -> usize {
    let c = array.centroid();
    (0..array.mic_count())
        .min_by(|&a, &b| {
            (array.mic(a) - c)
                .norm()
                .total_cmp(&(array.mic(b) - c).norm())
        })
        .expect("arrays have at least one microphone")
}

fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

fn in_vaps(vaps: &[(f64, f64)], t: f64) -> bool {
    vaps.iter().any(|&(a, b)| a <= t && t <= b)
}

/// 1 inside a period, 0 outside, raised-cosine ramps inside each edge.
fn envelope(vaps: &[(f64, f64)], t: f64) -> f64 {
    let Some(&(a, b)) = vaps.iter().find(|&&(a, b)| a <= t && t <= b) else {
        return 0.0;
    };
    let ramp = RAMP_S.min((b - a) / 2.0);
    let edge = (t - a).min(b - t);
    if edge >= ramp {
        1.0
    } else {
        0.5 * (1.0 - (PI * edge / ramp).cos())
    }
}

fn white(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Applies a real gain per FFT bin frequency to `x`.
fn shape_spectrum(x: &[f64], fs: f64, gain: impl Fn(f64) -> f64) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mut planner = FftPlanner::new();
    let mut buf: Vec<C64> = x.iter().map(|&v| C64::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, b) in buf.iter_mut().enumerate() {
        let f = k.min(n - k) as f64 * fs / n as f64;
        *b *= gain(f);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

fn pink(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let w = white(n, rng);
    shape_spectrum(&w, 1.0, |f| if f > 0.0 { f.sqrt().recip() } else { 0.0 })
}

/// Speech-band noise under a slow syllabic modulation; unit RMS before
/// modulation and never fully silent inside a VAP.
fn speech(n: usize, fs: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let w = white(n, rng);
    let (lo, hi) = SPEECH_BAND_HZ;
    let mut x = shape_spectrum(&w, fs, |f| if (lo..=hi).contains(&f) { 1.0 } else { 0.0 });
    let scale = rms(&x).max(f64::MIN_POSITIVE).recip();
    let rate = rng.random_range(3.0..6.0);
    let phase = rng.random_range(0.0..2.0 * PI);
    for (i, v) in x.iter_mut().enumerate() {
        let s = 0.5 + 0.5 * (2.0 * PI * rate * i as f64 / fs + phase).sin();
        *v *= scale * (0.3 + 0.7 * s * s);
    }
    x
}

/// Polyphase windowed-sinc table: row `p` holds the taps for fractional
/// delay `p / PHASES`, each row normalized to unit DC gain.
fn sinc_table() -> &'static [[f64; SINC_TAPS]] {
    static TABLE: OnceLock<Vec<[f64; SINC_TAPS]>> = OnceLock::new();
    TABLE.get_or_init(|| {
        (0..=PHASES)
            .map(|p| {
                let frac = p as f64 / PHASES as f64;
                let mut row = [0.0; SINC_TAPS];
                for (t, r) in row.iter_mut().enumerate() {
                    // tap t weights sample i0 + t - (HALF_TAPS - 1)
                    let u = frac - (t as f64 - (HALF_TAPS - 1) as f64);
                    let sinc = if u.abs() < 1e-12 {
                        1.0
                    } else {
                        (PI * u).sin() / (PI * u)
                    };
                    let win = 0.42
                        + 0.5 * (PI * u / HALF_TAPS as f64).cos()
                        + 0.08 * (2.0 * PI * u / HALF_TAPS as f64).cos();
                    *r = sinc * win;
                }
                let sum: f64 = row.iter().sum();
                row.iter_mut().for_each(|r| *r /= sum);
                row
            })
            .collect()
    })
}

/// The signal of one source as received by microphone `m`.
fn propagate(signal: &[f64], cfg: &SceneConfig, traj: &Trajectory, m: usize) -> Result<Vec<f64>> {
    let n = signal.len();
    let fs = cfg.sample_rate_hz;
    let local = cfg.array.mic(m);
    let last_t = cfg.array_trajectory.end_time().min(traj.end_time());
    let distance = |t: f64| -> Result<f64> {
        let t = t.min(last_t);
        let mic = cfg.array_trajectory.interpolate(t)?.local_to_global(&local);
        Ok((traj.position_at(t)? - mic).norm())
    };
    let knots = n.div_ceil(DISTANCE_STEP) + 1;
    let mut d = Vec::with_capacity(knots);
    for k in 0..knots {
        d.push(distance((k * DISTANCE_STEP) as f64 / fs)?);
    }
    let table = sinc_table();
    let delay_per_m = fs / cfg.speed_of_sound;
    let mut out = vec![0.0; n];
    for (i, o) in out.iter_mut().enumerate() {
        let k = i / DISTANCE_STEP;
        let s = (i % DISTANCE_STEP) as f64 / DISTANCE_STEP as f64;
        let dist = d[k] + (d[k + 1] - d[k]) * s;
        let x = i as f64 - dist * delay_per_m;
        let i0 = x.floor();
        let row = &table[((x - i0) * PHASES as f64).round() as usize];
        let first = i0 as i64 - (HALF_TAPS - 1);
        let mut acc = 0.0;
        if first >= 0 && first + SINC_TAPS as i64 <= n as i64 {
            let seg = &signal[first as usize..first as usize + SINC_TAPS];
            for (a, b) in seg.iter().zip(row) {
                acc += a * b;
            }
        } else {
            for (t, w) in row.iter().enumerate() {
                let j = first + t as i64;
                if j >= 0 && (j as usize) < n {
                    acc += signal[j as usize] * w;
                }
            }
        }
        *o = acc / dist.max(MIN_DISTANCE_M);
    }
    Ok(out)
}

/// Ten-second preset scene on the robot-head array.
pub fn task_preset(task: u8, seed: u64) -> Result<SceneConfig> {
    task_preset_with_array(task, seed, ArrayGeometry::robot_head(), DEFAULT_DURATION_S)
}

/// Scene for one of the six task types, placed around `array`.
///
/// Harness choices: array at the origin, sources in its horizontal plane
/// 1.5 to 3 m away (about 3 m and 60°–120° azimuth for collinear arrays,
/// whose front and back are indistinguishable), smooth random paths with
/// bounded speed, and speech-like activity with about 70% duty.
pub fn task_preset_with_array(
    task: u8,
    seed: u64,
    array: ArrayGeometry,
    duration: f64,
) -> Result<SceneConfig> {
    if !(1..=6).contains(&task) {
        return Err(Error::invalid(format!("task must be 1..6, got {task}")));
    }
    if !(duration >= 1.0 && duration.is_finite()) {
        return Err(Error::invalid(format!(
            "preset duration must be ≥ 1 s, got {duration}"
        )));
    }
    let (n_sources, moving_sources, moving_array) = match task {
        1 => (1, false, false),
        2 => (0, false, false),
        3 => (1, true, false),
        4 => (2, true, false),
        5 => (1, true, true),
        _ => (2, true, true),
    };
    let mut rng = stream_rng(seed, 1 << 32);
    let n_sources = if n_sources == 0 {
        rng.random_range(2..=3)
    } else {
        n_sources
    };
    let collinear = array.is_collinear();
    let mut cfg = SceneConfig::new(array, duration, seed)?;
    cfg.task = Some(task);

    let array_path = if moving_array {
        Some(SmoothPath::new(&mut rng, 0.4, 0.0, 25f64.to_radians()))
    } else {
        None
    };
    if let Some(p) = &array_path {
        let p = p.clone();
        cfg.array_trajectory = Trajectory::from_fn(duration, GROUND_TRUTH_RATE_HZ, |t| {
            let (xy, yaw) = p.array_pose(t);
            Pose::from_yaw(Vec3::new(xy.0, xy.1, 0.0), yaw, t)
        })?;
        // keep translation speed bounded
        let v = max_speed(&cfg.array_trajectory);
        if v > MAX_ARRAY_SPEED {
            let k = MAX_ARRAY_SPEED / v;
            cfg.array_trajectory = Trajectory::from_fn(duration, GROUND_TRUTH_RATE_HZ, |t| {
                let (xy, yaw) = p.array_pose(t);
                Pose::from_yaw(Vec3::new(k * xy.0, k * xy.1, 0.0), yaw, t)
            })?;
        }
    }

    let mut centres: Vec<f64> = Vec::new();
    for _ in 0..n_sources {
        let az = loop {
            let a = if collinear {
                rng.random_range(70f64..110.0).to_radians()
            } else {
                rng.random_range(-PI..PI)
            };
            let sep = if collinear {
                15f64.to_radians()
            } else {
                45f64.to_radians()
            };
            if centres
                .iter()
                .all(|&c| crate::geometry::wrap(a - c).abs() >= sep)
                || centres.len() >= 3
            {
                break a;
            }
        };
        centres.push(az);
        let radius = if collinear {
            rng.random_range(2.8..3.2)
        } else {
            rng.random_range(1.5..3.0)
        };
        let swing = if collinear {
            15f64.to_radians()
        } else {
            60f64.to_radians()
        };
        let path = SmoothPath::new(&mut rng, if moving_sources { 1.0 } else { 0.0 }, swing, 0.0);
        let traj = |k: f64| {
            Trajectory::from_fn(duration, GROUND_TRUTH_RATE_HZ, |t| {
                let (phi, r) = path.source_polar(t, az, radius, k);
                Pose::from_yaw(Vec3::new(r * phi.cos(), r * phi.sin(), 0.0), 0.0, t)
            })
        };
        let mut k = 1.0;
        let mut trajectory = traj(k)?;
        // speed is close to linear in the path scale; shrink until bounded
        loop {
            let v = max_speed(&trajectory);
            if v <= MAX_SOURCE_SPEED {
                break;
            }
            k *= 0.99 * MAX_SOURCE_SPEED / v;
            trajectory = traj(k)?;
        }
        cfg.sources.push(SourceConfig {
            signal: SignalKind::Speech,
            trajectory,
            vaps: random_vaps(&mut rng, duration),
        });
    }
    Ok(cfg)
}

/// Alternating talk and pause periods: talk 1.0–2.5 s, pause 0.3–1.0 s.
fn random_vaps(rng: &mut ChaCha8Rng, duration: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut t = rng.random_range(0.1..0.4);
    while t < duration - 0.5 {
        let end = (t + rng.random_range(1.0..2.5)).min(duration - 0.05);
        out.push((t, end));
        t = end + rng.random_range(0.3..1.0);
    }
    out
}

fn max_speed(traj: &Trajectory) -> f64 {
    traj.samples()
        .windows(2)
        .map(|w| {
            (w[1].translation() - w[0].translation()).norm() / (w[1].timestamp() - w[0].timestamp())
        })
        .fold(0.0, f64::max)
}

/// Sum of three slow sinusoids with random frequencies and phases.
#[derive(Debug, Clone)]
struct SmoothPath {
    amplitude: f64,
    swing: f64,
    yaw_swing: f64,
    terms: [(f64, f64, f64); 3],
    radial: (f64, f64),
}

impl SmoothPath {
    fn new(rng: &mut ChaCha8Rng, amplitude: f64, swing: f64, yaw_swing: f64) -> Self {
        let mut term = || {
            (
                rng.random_range(0.3..1.0),
                rng.random_range(0.04..0.2),
                rng.random_range(0.0..2.0 * PI),
            )
        };
        let terms = [term(), term(), term()];
        let radial = (
            rng.random_range(0.05..0.15),
            rng.random_range(0.0..2.0 * PI),
        );
        Self {
            amplitude,
            swing,
            yaw_swing,
            terms,
            radial,
        }
    }

    fn value(&self, t: f64, shift: f64) -> f64 {
        let norm: f64 = self.terms.iter().map(|x| x.0).sum();
        self.terms
            .iter()
            .map(|&(a, f, p)| a * (2.0 * PI * f * t + p + shift).sin())
            .sum::<f64>()
            / norm
    }

    /// Azimuth and range of a source orbiting `az0` at about `r0`, scaled by `k`.
    fn source_polar(&self, t: f64, az0: f64, r0: f64, k: f64) -> (f64, f64) {
        let a = self.amplitude * k;
        let phi = az0 + a * self.swing * self.value(t, 0.0);
        let r = r0 * (1.0 + 0.15 * a * (2.0 * PI * self.radial.0 * t + self.radial.1).sin());
        (phi, r)
    }

    /// Planar offset in metres and yaw of a wandering array.
    fn array_pose(&self, t: f64) -> ((f64, f64), f64) {
        let x = self.amplitude * self.value(t, 0.0);
        let y = self.amplitude * self.value(t, 1.7);
        let yaw = self.yaw_swing * self.value(t, 3.1);
        ((x, y), yaw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Doa;
    use crate::localize::{expected_tdoa, gcc_phat, max_physical_lag};
    use crate::sigproc::{cross_power_spectrum, frame_signal, Window};

    fn static_scene(
        array: ArrayGeometry,
        source: Vec3,
        signal: SignalKind,
        noise: NoiseKind,
    ) -> SceneConfig {
        let mut cfg = SceneConfig::new(array, 1.0, 3).unwrap();
        cfg.noise = noise;
        cfg.snr_db = None;
        cfg.sources.push(SourceConfig {
            signal,
            trajectory: Trajectory::constant(&Pose::from_yaw(source, 0.0, 0.0), 1.0, 120.0)
                .unwrap(),
            vaps: vec![(0.0, 1.0)],
        });
        cfg
    }

    #[test]
    fn gcc_recovers_the_rendered_delay() {
        let array = ArrayGeometry::dicit_subarray(0.16).unwrap();
        let src = Vec3::new(1.3, 2.1, 0.4);
        let scene = synthesize(&static_scene(
            array.clone(),
            src,
            SignalKind::White,
            NoiseKind::None,
        ))
        .unwrap();
        let fs = scene.audio.sample_rate_hz();
        let frames = frame_signal(&scene.audio, 2048, 1024, Window::Hann).unwrap();
        for &(m, l) in &[(0, 1), (0, 6), (2, 5), (6, 3)] {
            let cs = cross_power_spectrum(&frames[4..], (m, l), 16).unwrap();
            let lag = max_physical_lag(&array.mic(m), &array.mic(l), fs, SPEED_OF_SOUND) + 2.0;
            let est = gcc_phat(&cs, lag, 16).unwrap();
            let truth =
                expected_tdoa(&src, &array.mic(m), &array.mic(l), fs, SPEED_OF_SOUND).unwrap();
            assert!(
                (est.delay - truth).abs() < 0.1,
                "pair {m},{l}: {} vs {truth}",
                est.delay
            );
        }
    }

    #[test]
    fn symmetric_mics_receive_identical_signals() {
        let array = ArrayGeometry::new(
            "pair",
            vec![Vec3::new(-0.1, 0.0, 0.0), Vec3::new(0.1, 0.0, 0.0)],
        )
        .unwrap();
        let scene = synthesize(&static_scene(
            array,
            Vec3::new(0.0, 2.0, 0.0),
            SignalKind::Speech,
            NoiseKind::None,
        ))
        .unwrap();
        assert_eq!(scene.audio.channel(0), scene.audio.channel(1));
    }

    #[test]
    fn spreading_loss_is_inverse_distance() {
        // unquantized propagation of a unit-RMS speech-band signal, compared
        // over windows aligned by the integer part of the delay
        let signal = speech(48_000, 48_000.0, &mut stream_rng(1, 1));
        let array =
            ArrayGeometry::new("pair", vec![Vec3::zeros(), Vec3::new(0.0, 0.1, 0.0)]).unwrap();
        let level = |r: f64| {
            let cfg = static_scene(
                array.clone(),
                Vec3::new(r, 0.0, 0.0),
                SignalKind::White,
                NoiseKind::None,
            );
            let d = (r * 48_000.0 / SPEED_OF_SOUND).round() as usize;
            rms(
                &propagate(&signal, &cfg, &cfg.sources[0].trajectory, 0).unwrap()
                    [4800 + d..40_000 + d],
            )
        };
        for r in [1.0, 1.7, 3.0] {
            let ratio = level(2.0 * r) / level(r);
            assert!((ratio - 0.5).abs() < 0.005, "r {r}: {ratio}");
        }
        let reference = rms(&signal[4800..40_000]);
        assert!((level(2.0) / reference - 0.5).abs() < 0.005);
    }

    #[test]
    fn empty_scene_is_noise_at_the_set_level() {
        for noise in [NoiseKind::White, NoiseKind::Pink] {
            let mut cfg = SceneConfig::new(ArrayGeometry::robot_head(), 2.0, 5).unwrap();
            cfg.noise = noise;
            let s = synthesize(&cfg).unwrap();
            assert_eq!(s.audio.len(), 96_000);
            for ch in s.audio.channels() {
                assert!((rms(ch) / cfg.noise_rms - 1.0).abs() < 0.01);
            }
        }
    }

    #[test]
    fn snr_is_met_at_the_reference_mic() {
        let mut cfg = task_preset_with_array(1, 4, ArrayGeometry::robot_head(), 3.0).unwrap();
        cfg.sources[0].vaps = vec![(0.5, 2.5)];
        let mut clean = cfg.clone();
        clean.noise = NoiseKind::None;
        let s = synthesize(&clean).unwrap();
        let r = nearest_to_centroid(&cfg.array);
        let active = &s.audio.channel(r)[24_000..120_000];
        let snr = 20.0 * (rms(active) / cfg.noise_rms).log10();
        assert!((snr - 20.0).abs() < 0.01, "{snr}");
        // silent outside the period, apart from arrival delay
        assert!(s.audio.channel(r)[..23_000].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn near_field_sources_are_rejected() {
        let array = ArrayGeometry::robot_head();
        let cfg = static_scene(
            array.clone(),
            array.mic(3) * 1.5,
            SignalKind::White,
            NoiseKind::White,
        );
        assert!(matches!(synthesize(&cfg), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn output_sits_on_the_pcm_grid() {
        let s = synthesize(&task_preset(2, 1).unwrap()).unwrap();
        let full = (1i64 << 23) as f64;
        assert!(s
            .audio
            .channels()
            .iter()
            .flatten()
            .all(|x| (x * full).fract() == 0.0 && x.abs() <= 1.0));
    }

    #[test]
    fn presets_follow_the_task_grid() {
        for seed in 0..4 {
            let t1 = task_preset(1, seed).unwrap();
            assert_eq!(t1.sources.len(), 1);
            assert!(t1.sources[0].trajectory.is_constant() && t1.array_trajectory.is_constant());
            let t2 = task_preset(2, seed).unwrap();
            assert!((2..=3).contains(&t2.sources.len()));
            assert!(t2.sources.iter().all(|s| s.trajectory.is_constant()));
            for task in 3..=6 {
                let c = task_preset(task, seed).unwrap();
                assert_eq!(c.sources.len(), [1, 2, 1, 2][task as usize - 3]);
                assert!(c.sources.iter().all(|s| !s.trajectory.is_constant()));
                assert!(c
                    .sources
                    .iter()
                    .all(|s| max_speed(&s.trajectory) <= MAX_SOURCE_SPEED + 1e-9));
                assert_eq!(c.array_trajectory.is_constant(), task < 5);
                c.validate().unwrap();
            }
            let duty: f64 =
                t1.sources[0].vaps.iter().map(|(a, b)| b - a).sum::<f64>() / t1.duration;
            assert!((0.55..0.85).contains(&duty), "{duty}");
        }
        assert!(task_preset(0, 1).is_err());
        assert!(task_preset(7, 1).is_err());
    }

    #[test]
    fn linear_array_presets_stay_broadside() {
        let array = ArrayGeometry::dicit_subarray(0.32).unwrap();
        for seed in 0..5 {
            let cfg = task_preset_with_array(3, seed, array.clone(), 10.0).unwrap();
            for p in cfg.sources[0].trajectory.samples() {
                let az = Doa::from_vector(p.translation())
                    .unwrap()
                    .azimuth()
                    .to_degrees();
                assert!((55.0..=125.0).contains(&az), "{az}");
            }
        }
    }

    #[test]
    fn synthesis_is_deterministic() {
        let mut short = task_preset_with_array(5, 11, ArrayGeometry::robot_head(), 1.0).unwrap();
        let a = synthesize(&short).unwrap();
        let b = synthesize(&short).unwrap();
        assert_eq!(a.audio, b.audio);
        short.seed = 12;
        assert_ne!(synthesize(&short).unwrap().audio, a.audio);
    }

    #[test]
    fn audio_and_truth_stay_synchronized() {
        use crate::geometry::{global_to_local, wrap};
        use crate::localize::{srp_argmax, srp_phat, DoaGrid, SrpConfig};
        let array = ArrayGeometry::robot_head();
        let (a, b) = (Vec3::new(2.0, 1.0, 0.0), Vec3::new(-1.0, -2.5, 0.0));
        let mut cfg = SceneConfig::new(array.clone(), 3.0, 21).unwrap();
        cfg.sources.push(SourceConfig {
            signal: SignalKind::Speech,
            trajectory: Trajectory::from_fn(3.0, 120.0, |t| {
                Pose::from_yaw(if t < 1.5 { a } else { b }, 0.0, t)
            })
            .unwrap(),
            vaps: vec![(0.2, 1.3), (1.7, 2.8)],
        });
        let scene = synthesize(&cfg).unwrap();
        let frames = frame_signal(&scene.audio, 2048, 1024, Window::Hann).unwrap();
        let grid = DoaGrid::azimuth_ring(0.5).unwrap();
        for (t, pos) in [(0.75, a), (2.25, b)] {
            let centre = frames
                .iter()
                .position(|f| f.frame_center_time() >= t)
                .unwrap();
            let block = &frames[centre - 8..centre + 8];
            let est = srp_argmax(&srp_phat(block, &array, &grid, SrpConfig::default()).unwrap());
            let truth =
                global_to_local(&pos, &scene.array_trajectory.interpolate(t).unwrap()).unwrap();
            assert!(
                wrap(est.azimuth() - truth.azimuth()).abs() < 1f64.to_radians(),
                "{t}"
            );
        }
    }

    #[test]
    fn ground_truth_matches_geometry() {
        let cfg = task_preset_with_array(1, 2, ArrayGeometry::robot_head(), 1.0).unwrap();
        let scene = synthesize(&cfg).unwrap();
        let gt = scene.ground_truth(false).unwrap();
        assert_eq!(gt.clock().len(), 121);
        let p = cfg.sources[0].trajectory.samples()[0].translation();
        assert!(gt.doa(0, 60).angle_to(&Doa::from_vector(p).unwrap()) < 1e-7);
    }
}

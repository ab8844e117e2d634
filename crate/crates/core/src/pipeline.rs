//! Frontend → localizer → tracker composition.
//!
//! Audio is framed, frames are grouped into blocks of `block_frames` that
//! advance by `block_frames`, and each block yields up to `n_sources`
//! estimates stamped at the block centre. The tracker turns the estimate
//! stream into labelled states on the evaluation clock.

use serde::{Deserialize, Serialize};

use crate::geometry::{ArrayGeometry, SPEED_OF_SOUND};
use crate::localize::{
    block_direction, gcc_phat, intensity_vectors, max_physical_lag, tdoa_fit, DoaEstimate, DoaGrid,
    IntensityConfig, MusicConfig, MusicPlan, SrpConfig, SrpPlan, TdoaEstimate, DEFAULT_BAND_HZ,
};
use crate::sigproc::{
    band_bins, cross_power_spectrum, frame_signal, MultichannelAudio, SpectralFrame, Window,
    DEFAULT_AVERAGING_FRAMES, DEFAULT_HOP, DEFAULT_WINDOW_LENGTH,
};
use crate::track::{track_lifecycle, tracks_to_estimates, LifecycleConfig, Track};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LocalizerKind {
    #[default]
    SrpPhat,
    Music,
    GccPhat,
    PseudoIntensity,
}

impl std::str::FromStr for LocalizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "srp-phat" | "srp" => Ok(Self::SrpPhat),
            "music" => Ok(Self::Music),
            "gcc-phat" | "gcc" => Ok(Self::GccPhat),
            "pseudo-intensity" | "piv" => Ok(Self::PseudoIntensity),
            other => Err(Error::invalid(format!("unknown localizer '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridKind {
    /// Full sphere for spherical arrays, half ring for collinear ones, ring otherwise.
    #[default]
    Auto,
    Ring,
    HalfRing,
    Sphere,
}

impl std::str::FromStr for GridKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Self::Auto),
            "ring" => Ok(Self::Ring),
            "half-ring" => Ok(Self::HalfRing),
            "sphere" => Ok(Self::Sphere),
            other => Err(Error::invalid(format!("unknown grid '{other}'"))),
        }
    }
}

/// Which microphone pairs feed the GCC-PHAT fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairSelection {
    /// Neighbours in microphone order.
    #[default]
    Adjacent,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub localizer: LocalizerKind,
    pub n_sources: usize,
    pub window_length: usize,
    pub hop: usize,
    pub window: Window,
    /// Frames per localization block; MUSIC uses at least one per microphone.
    pub block_frames: usize,
    pub band_hz: (f64, f64),
    pub grid: GridKind,
    /// Grid spacing in degrees; 1° for rings and 2° for the sphere when unset.
    pub grid_resolution_deg: Option<f64>,
    /// Lag-domain oversampling for GCC-PHAT and SRP lookups.
    pub interpolation: usize,
    pub pairs: PairSelection,
    /// Blocks whose mean frame power is within this many dB of the
    /// 1st-percentile frame power are skipped. `None` localizes every block.
    pub activity_db: Option<f64>,
    pub speed_of_sound: f64,
    pub tracker: LifecycleConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            localizer: LocalizerKind::SrpPhat,
            n_sources: 1,
            window_length: DEFAULT_WINDOW_LENGTH,
            hop: DEFAULT_HOP,
            window: Window::Hann,
            block_frames: DEFAULT_AVERAGING_FRAMES,
            band_hz: DEFAULT_BAND_HZ,
            grid: GridKind::Auto,
            grid_resolution_deg: None,
            interpolation: 8,
            pairs: PairSelection::Adjacent,
            activity_db: Some(6.0),
            speed_of_sound: SPEED_OF_SOUND,
            tracker: LifecycleConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Rejects parameter and localizer/array combinations that cannot run,
    /// before any audio is touched.
    pub fn validate(&self, geometry: &ArrayGeometry) -> Result<()> {
        if self.n_sources == 0 {
            return Err(Error::invalid("n_sources must be ≥ 1"));
        }
        if self.window_length < 2
            || self.hop == 0
            || self.block_frames == 0
            || self.interpolation == 0
        {
            return Err(Error::invalid(
                "window length, hop, block size and interpolation must be positive",
            ));
        }
        if !(0.0 <= self.band_hz.0 && self.band_hz.0 < self.band_hz.1) {
            return Err(Error::invalid(format!("bad band {:?} Hz", self.band_hz)));
        }
        if let Some(r) = self.grid_resolution_deg {
            if !(r > 0.0 && r <= 90.0) {
                return Err(Error::invalid(format!(
                    "grid resolution {r}° out of (0, 90]"
                )));
            }
        }
        if !(self.speed_of_sound > 0.0) {
            return Err(Error::invalid("speed of sound must be > 0"));
        }
        self.tracker.validate()?;
        match self.localizer {
            LocalizerKind::PseudoIntensity if !geometry.is_spherical() => {
                Err(Error::UnsupportedGeometry(format!(
                    "pseudo-intensity needs a spherical array; '{}' is not",
                    geometry.name()
                )))
            }
            LocalizerKind::Music if self.n_sources >= geometry.mic_count() => {
                Err(Error::invalid(format!(
                    "MUSIC resolves at most {} sources with {} microphones",
                    geometry.mic_count() - 1,
                    geometry.mic_count()
                )))
            }
            LocalizerKind::GccPhat | LocalizerKind::PseudoIntensity if self.n_sources != 1 => {
                Err(Error::invalid(
                    "GCC-PHAT and pseudo-intensity estimate a single direction per block",
                ))
            }
            _ => Ok(()),
        }
    }

    pub fn grid_for(&self, geometry: &ArrayGeometry) -> Result<DoaGrid> {
        let kind = match self.grid {
            GridKind::Auto if geometry.is_spherical() => GridKind::Sphere,
            GridKind::Auto if geometry.is_collinear() => GridKind::HalfRing,
            GridKind::Auto => GridKind::Ring,
            k => k,
        };
        match kind {
            GridKind::Sphere => DoaGrid::sphere(self.grid_resolution_deg.unwrap_or(2.0)),
            GridKind::HalfRing => DoaGrid::half_ring(self.grid_resolution_deg.unwrap_or(1.0)),
            _ => DoaGrid::azimuth_ring(self.grid_resolution_deg.unwrap_or(1.0)),
        }
    }

    fn block_len(&self, geometry: &ArrayGeometry) -> usize {
        match self.localizer {
            LocalizerKind::Music => self.block_frames.max(geometry.mic_count()),
            _ => self.block_frames,
        }
    }
}

/// Outputs of every pipeline stage.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    /// Per-block localizer estimates, labelled by peak rank.
    pub raw: Vec<DoaEstimate>,
    pub tracks: Vec<Track>,
    /// Track states on the evaluation clock, labelled by track id.
    pub estimates: Vec<DoaEstimate>,
}

/// Runs the localizer over the whole recording.
pub fn localize_blocks(
    audio: &MultichannelAudio,
    geometry: &ArrayGeometry,
    config: &PipelineConfig,
) -> Result<Vec<DoaEstimate>> {
    config.validate(geometry)?;
    if audio.channel_count() != geometry.mic_count() {
        return Err(Error::invalid(format!(
            "{} audio channels for {} microphones",
            audio.channel_count(),
            geometry.mic_count()
        )));
    }
    let frames = frame_signal(audio, config.window_length, config.hop, config.window)?;
    let block = config.block_len(geometry);
    let fs = audio.sample_rate_hz();
    // blocks end every `block_frames` frames once `block` frames are available
    let ends: Vec<usize> = (1..)
        .map(|k| k * config.block_frames)
        .map(|e| e.max(block))
        .take_while(|&e| e <= frames.len())
        .collect::<Vec<_>>();
    let mut ends = ends;
    ends.dedup();
    let active = activity_mask(&frames, &ends, block, config)?;

    let localizer = Localizer::new(geometry, fs, config)?;
    let mut out = Vec::new();
    for (&end, &on) in ends.iter().zip(&active) {
        if !on {
            continue;
        }
        let frames = &frames[end - block..end];
        let t =
            0.5 * (frames[0].frame_center_time() + frames[frames.len() - 1].frame_center_time());
        match localizer.estimate(frames, config) {
            Ok(list) => {
                for (rank, (doa, score)) in list.into_iter().enumerate() {
                    out.push(DoaEstimate {
                        timestamp: t,
                        doa,
                        source_id: rank as u32 + 1,
                        score,
                    });
                }
            }
            Err(Error::NoSignal(_)) | Err(Error::IllConditioned(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Localizes, tracks and samples the tracks on `clock`.
pub fn run_pipeline(
    audio: &MultichannelAudio,
    geometry: &ArrayGeometry,
    clock: &[f64],
    config: &PipelineConfig,
) -> Result<PipelineOutput> {
    let raw = localize_blocks(audio, geometry, config)?;
    let tracks = track_lifecycle(&raw, clock, &config.tracker);
    let estimates = tracks_to_estimates(&tracks);
    Ok(PipelineOutput {
        raw,
        tracks,
        estimates,
    })
}

fn activity_mask(
    frames: &[SpectralFrame],
    ends: &[usize],
    block: usize,
    config: &PipelineConfig,
) -> Result<Vec<bool>> {
    let Some(db) = config.activity_db else {
        return Ok(vec![true; ends.len()]);
    };
    let Some(first) = frames.first() else {
        return Ok(Vec::new());
    };
    let bins = band_bins(
        config.band_hz.0,
        config.band_hz.1,
        first.window_length(),
        first.sample_rate_hz(),
    );
    let power: Vec<f64> = frames
        .iter()
        .map(|f| {
            (0..f.channel_count())
                .map(|m| {
                    f.channel(m)[bins.clone()]
                        .iter()
                        .map(|c| c.norm_sqr())
                        .sum::<f64>()
                })
                .sum::<f64>()
        })
        .collect();
    // noise floor: 1st percentile of frame power, so that a few silent
    // frames suffice even when sources overlap for most of the recording
    let mut sorted = power.clone();
    sorted.sort_by(f64::total_cmp);
    let floor = sorted[(sorted.len() - 1) / 100];
    let threshold = floor * 10f64.powf(db / 10.0);
    Ok(ends
        .iter()
        .map(|&end| power[end - block..end].iter().sum::<f64>() / block as f64 > threshold)
        .collect())
}

enum Localizer {
    Srp(SrpPlan),
    Music(MusicPlan),
    Gcc {
        pairs: Vec<(usize, usize)>,
        max_lags: Vec<f64>,
        grid: DoaGrid,
        geometry: ArrayGeometry,
        fs: f64,
    },
    Intensity {
        geometry: ArrayGeometry,
        config: IntensityConfig,
    },
}

impl Localizer {
    fn new(geometry: &ArrayGeometry, fs: f64, cfg: &PipelineConfig) -> Result<Self> {
        let c = cfg.speed_of_sound;
        Ok(match cfg.localizer {
            LocalizerKind::SrpPhat => Self::Srp(SrpPlan::new(
                geometry,
                &cfg.grid_for(geometry)?,
                fs,
                SrpConfig {
                    band_hz: cfg.band_hz,
                    speed_of_sound: c,
                    interpolation: cfg.interpolation,
                },
            )?),
            LocalizerKind::Music => Self::Music(MusicPlan::new(
                geometry,
                &cfg.grid_for(geometry)?,
                fs,
                MusicConfig {
                    band_hz: cfg.band_hz,
                    speed_of_sound: c,
                    ..MusicConfig::default()
                },
            )?),
            LocalizerKind::GccPhat => {
                let m = geometry.mic_count();
                let pairs: Vec<(usize, usize)> = match cfg.pairs {
                    PairSelection::Adjacent => (0..m - 1).map(|i| (i, i + 1)).collect(),
                    PairSelection::All => (0..m)
                        .flat_map(|i| (i + 1..m).map(move |j| (i, j)))
                        .collect(),
                };
                let max_lags = pairs
                    .iter()
                    .map(|&(a, b)| {
                        max_physical_lag(&geometry.mic(a), &geometry.mic(b), fs, c) + 1.0
                    })
                    .collect();
                Self::Gcc {
                    pairs,
                    max_lags,
                    grid: cfg.grid_for(geometry)?,
                    geometry: geometry.clone(),
                    fs,
                }
            }
            LocalizerKind::PseudoIntensity => Self::Intensity {
                geometry: geometry.clone(),
                config: IntensityConfig {
                    band_hz: cfg.band_hz,
                    speed_of_sound: c,
                },
            },
        })
    }

    fn estimate(
        &self,
        frames: &[SpectralFrame],
        cfg: &PipelineConfig,
    ) -> Result<Vec<(crate::geometry::Doa, f64)>> {
        let separation = 20f64.to_radians();
        match self {
            Self::Srp(plan) => Ok(plan.spectrum(frames)?.peaks(cfg.n_sources, separation)),
            Self::Music(plan) => Ok(plan
                .spectrum(frames, cfg.n_sources)?
                .peaks(cfg.n_sources, separation)),
            Self::Gcc {
                pairs,
                max_lags,
                grid,
                geometry,
                fs,
            } => {
                let mut delays: Vec<TdoaEstimate> = Vec::with_capacity(pairs.len());
                for (&pair, &lag) in pairs.iter().zip(max_lags) {
                    let cs = cross_power_spectrum(frames, pair, frames.len())?;
                    delays.push(gcc_phat(&cs, lag, cfg.interpolation)?);
                }
                let confidence =
                    delays.iter().map(|d| d.confidence).sum::<f64>() / delays.len() as f64;
                Ok(vec![(
                    tdoa_fit(&delays, geometry, grid, *fs, cfg.speed_of_sound)?,
                    confidence,
                )])
            }
            Self::Intensity { geometry, config } => {
                let vectors = intensity_vectors(frames, geometry, *config)?;
                let norm = vectors.iter().flatten().map(|v| v.norm()).sum::<f64>();
                match block_direction(&vectors) {
                    Some(d) => Ok(vec![(d, norm)]),
                    None => Err(Error::NoSignal("block carried no intensity".into())),
                }
            }
        }
    }
}

//! Recording directories and submission files on disk.
//!
//! Angles are degrees on disk and radians in memory. Table layouts come from
//! a [`CorpusSchema`]; the built-in one is `schema.toml` next to this file.

mod schema;
mod submission;
mod tables;

use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};

pub use schema::{
    CorpusSchema, Delimiter, FileNames, GeometrySchema, PositionSchema, VadFormat, VadSchema,
};
pub use submission::{
    format_submission, parse_submission, read_submission, write_submission, SUBMISSION_HEADER,
};

use crate::evaluate::{GroundTruth, VapTable};
use crate::geometry::{ArrayGeometry, Trajectory, GROUND_TRUTH_RATE_HZ};
use crate::sigproc::{MultichannelAudio, DEFAULT_SAMPLE_RATE_HZ};
use crate::simulate::Scene;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    /// Source positions and activity labels are shipped.
    #[default]
    Dev,
    /// Only audio and array positions are shipped.
    Eval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordingMeta {
    pub recording_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<u8>,
    pub array: String,
    #[serde(default)]
    pub split: Split,
    #[serde(default)]
    pub sources: Vec<String>,
    /// Positional-table time of audio sample 0.
    #[serde(default)]
    pub time_origin_s: f64,
}

/// One recording: audio, array pose and, for development data, the truth.
#[derive(Debug, Clone)]
pub struct RecordingBundle {
    pub meta: RecordingMeta,
    pub audio: MultichannelAudio,
    pub geometry: ArrayGeometry,
    pub array_trajectory: Trajectory,
    /// `None` on the evaluation split.
    pub sources: Option<Vec<Trajectory>>,
    pub vaps: Option<VapTable>,
}

impl RecordingBundle {
    pub fn from_scene(scene: &Scene, recording_id: &str) -> Self {
        Self {
            meta: RecordingMeta {
                recording_id: recording_id.to_string(),
                task: scene.config.task,
                array: scene.config.array.name().to_string(),
                split: Split::Dev,
                sources: (1..=scene.sources.len()).map(|k| k.to_string()).collect(),
                time_origin_s: 0.0,
            },
            audio: scene.audio.clone(),
            geometry: scene.config.array.clone(),
            array_trajectory: scene.array_trajectory.clone(),
            sources: Some(scene.sources.clone()),
            vaps: Some(scene.vaps.clone()),
        }
    }

    /// Ticks `k/120` covered by the audio and every positional stream.
    pub fn clock(&self) -> Vec<f64> {
        let mut start = self
            .array_trajectory
            .start_time()
            .max(self.audio.start_time());
        let mut end = self
            .array_trajectory
            .end_time()
            .min(self.audio.start_time() + self.audio.duration());
        for s in self.sources.iter().flatten() {
            start = start.max(s.start_time());
            end = end.min(s.end_time());
        }
        let first = (start * GROUND_TRUTH_RATE_HZ - 1e-9).ceil() as i64;
        let last = (end * GROUND_TRUTH_RATE_HZ + 1e-9).floor() as i64;
        (first..=last)
            .map(|k| k as f64 / GROUND_TRUTH_RATE_HZ)
            .collect()
    }

    /// Truth on [`Self::clock`]; errors on the evaluation split.
    pub fn ground_truth(&self, speed_of_sound: f64, align: bool) -> Result<GroundTruth> {
        let (Some(sources), Some(vaps)) = (&self.sources, &self.vaps) else {
            return Err(Error::invalid(format!(
                "recording '{}' carries no ground truth (evaluation split)",
                self.meta.recording_id
            )));
        };
        GroundTruth::from_trajectories(
            &self.clock(),
            &self.array_trajectory,
            sources,
            vaps,
            speed_of_sound,
            align,
        )
    }
}

/// Reads a recording with the built-in schema.
pub fn read_recording(dir: &Path) -> Result<RecordingBundle> {
    read_recording_with(dir, &CorpusSchema::builtin())
}

pub fn read_recording_with(dir: &Path, schema: &CorpusSchema) -> Result<RecordingBundle> {
    if !dir.is_dir() {
        return Err(Error::MissingFile(dir.to_path_buf()));
    }
    let meta_path = dir.join(&schema.files.meta);
    let meta: RecordingMeta =
        toml::from_str(&read_text(&meta_path)?).map_err(|e| Error::Parse {
            file: meta_path.clone(),
            line: 0,
            message: e.to_string(),
        })?;
    let names = |pattern: &str, source: Option<&str>| -> PathBuf {
        dir.join(
            pattern
                .replace("{array}", &meta.array)
                .replace("{source}", source.unwrap_or("")),
        )
    };

    let audio_path = names(&schema.files.audio, None);
    let audio = read_wav(&audio_path)?;
    if audio.sample_rate_hz() != DEFAULT_SAMPLE_RATE_HZ {
        warn!(
            "{}: sample rate {} Hz (expected 48000)",
            audio_path.display(),
            audio.sample_rate_hz()
        );
    }

    let geometry_path = names(&schema.files.array_geometry, None);
    let geometry = if geometry_path.exists() {
        tables::read_geometry(&geometry_path, &meta.array, &schema.geometry)?
    } else {
        ArrayGeometry::preset(&meta.array).map_err(|_| Error::MissingFile(geometry_path.clone()))?
    };
    if geometry.mic_count() != audio.channel_count() {
        return Err(Error::Format(format!(
            "{}: {} channels but array '{}' has {} microphones",
            audio_path.display(),
            audio.channel_count(),
            meta.array,
            geometry.mic_count()
        )));
    }

    let array_trajectory = tables::read_positions(
        &names(&schema.files.array_positions, None),
        &schema.positions,
        meta.time_origin_s,
    )?;

    let (sources, vaps) = match meta.split {
        Split::Eval => (None, None),
        Split::Dev => {
            let mut trajs = Vec::with_capacity(meta.sources.len());
            let mut periods = Vec::with_capacity(meta.sources.len());
            for s in &meta.sources {
                trajs.push(tables::read_positions(
                    &names(&schema.files.source_positions, Some(s)),
                    &schema.positions,
                    meta.time_origin_s,
                )?);
                periods.push(tables::read_vad(
                    &names(&schema.files.vad, Some(s)),
                    &schema.vad,
                    audio.sample_rate_hz(),
                )?);
            }
            (Some(trajs), Some(VapTable::new(periods)?))
        }
    };
    Ok(RecordingBundle {
        meta,
        audio,
        geometry,
        array_trajectory,
        sources,
        vaps,
    })
}

/// Writes `bundle` in the built-in layout. Evaluation-split bundles omit
/// source positions and activity labels.
pub fn write_recording(bundle: &RecordingBundle, dir: &Path) -> Result<()> {
    let schema = CorpusSchema::builtin();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta = &bundle.meta;
    let names = |pattern: &str, source: &str| {
        dir.join(
            pattern
                .replace("{array}", &meta.array)
                .replace("{source}", source),
        )
    };
    let text = toml::to_string(meta).map_err(|e| Error::Format(e.to_string()))?;
    write_text(&dir.join(&schema.files.meta), &text)?;
    write_wav(&names(&schema.files.audio, ""), &bundle.audio)?;
    write_text(
        &names(&schema.files.array_geometry, ""),
        &tables::format_geometry(&bundle.geometry),
    )?;
    write_text(
        &names(&schema.files.array_positions, ""),
        &tables::format_positions(&bundle.array_trajectory, true, meta.time_origin_s),
    )?;
    if meta.split == Split::Dev {
        let (Some(sources), Some(vaps)) = (&bundle.sources, &bundle.vaps) else {
            return Err(Error::invalid(
                "development bundles need source trajectories and VAPs",
            ));
        };
        if sources.len() != meta.sources.len() || vaps.source_count() != meta.sources.len() {
            return Err(Error::invalid(
                "source names, trajectories and VAP lists differ in number",
            ));
        }
        for (k, name) in meta.sources.iter().enumerate() {
            write_text(
                &names(&schema.files.source_positions, name),
                &tables::format_positions(&sources[k], false, meta.time_origin_s),
            )?;
            write_text(
                &names(&schema.files.vad, name),
                &tables::format_vad(vaps.periods(k)),
            )?;
        }
    }
    Ok(())
}

/// Exports a simulated scene as a development recording.
pub fn write_scene(scene: &Scene, dir: &Path, recording_id: &str) -> Result<()> {
    write_recording(&RecordingBundle::from_scene(scene, recording_id), dir)
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Decodes PCM or float WAV to samples in [−1, 1].
pub fn read_wav(path: &Path) -> Result<MultichannelAudio> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let wav = |source| Error::Wav {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = hound::WavReader::open(path).map_err(wav)?;
    let spec = reader.spec();
    let n_ch = spec.channels as usize;
    let interleaved: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Int => {
            let full = (1i64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 / full))
                .collect::<std::result::Result<_, _>>()
                .map_err(wav)?
        }
        hound::SampleFormat::Float => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(wav)?,
    };
    if n_ch == 0 || interleaved.len() % n_ch != 0 {
        return Err(Error::Format(format!(
            "{}: sample count not a multiple of the channel count",
            path.display()
        )));
    }
    let mut channels = vec![Vec::with_capacity(interleaved.len() / n_ch); n_ch];
    for frame in interleaved.chunks_exact(n_ch) {
        for (c, &v) in channels.iter_mut().zip(frame) {
            c.push(v);
        }
    }
    MultichannelAudio::new(channels, spec.sample_rate as f64, 0.0)
}

/// Writes 24-bit PCM; samples off the 24-bit grid are rounded, out-of-range ones clipped.
pub fn write_wav(path: &Path, audio: &MultichannelAudio) -> Result<()> {
    let wav = |source| Error::Wav {
        path: path.to_path_buf(),
        source,
    };
    let spec = hound::WavSpec {
        channels: audio.channel_count() as u16,
        sample_rate: audio.sample_rate_hz().round() as u32,
        bits_per_sample: 24,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(wav)?;
    let full = (1i64 << 23) as f64;
    for i in 0..audio.len() {
        for ch in audio.channels() {
            let v = (ch[i] * full).round().clamp(-full, full - 1.0) as i32;
            writer.write_sample(v).map_err(wav)?;
        }
    }
    writer.finalize().map_err(wav)
}

//! Effective configuration: defaults, then the TOML file, then flags.

use std::path::Path;

use doakit::corpus_io::CorpusSchema;
use doakit::evaluate::{EvalConfig, OspaParams, DEFAULT_GATE_DEG};
use doakit::geometry::ArrayGeometry;
use doakit::pipeline::PipelineConfig;
use doakit::simulate::{NoiseKind, DEFAULT_DURATION_S, DEFAULT_SNR_DB};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Scene seed for `simulate`.
    pub seed: u64,
    pub simulate: SimulateSection,
    pub pipeline: PipelineConfig,
    pub evaluate: EvaluateSection,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 0,
            simulate: SimulateSection::default(),
            pipeline: PipelineConfig::default(),
            evaluate: EvaluateSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub task: u8,
    pub array: String,
    pub duration: f64,
    /// `None` leaves every source at unit RMS.
    pub snr_db: Option<f64>,
    pub noise: NoiseKind,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            task: 1,
            array: "robot-head".into(),
            duration: DEFAULT_DURATION_S,
            snr_db: Some(DEFAULT_SNR_DB),
            noise: NoiseKind::White,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    pub gate_deg: f64,
    pub ospa_p: Vec<f64>,
    pub ospa_c: f64,
    pub pd_per_source: bool,
    /// Shift activity periods by the source-to-array propagation delay.
    pub align_vaps: bool,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        Self {
            gate_deg: DEFAULT_GATE_DEG,
            ospa_p: vec![1.0, 5.0],
            ospa_c: 30.0,
            pd_per_source: false,
            align_vaps: false,
        }
    }
}

impl EvaluateSection {
    pub fn to_eval_config(&self) -> Result<EvalConfig, CliError> {
        if !(self.gate_deg > 0.0 && self.gate_deg <= 180.0) {
            return Err(CliError::Usage(format!(
                "gate {}° must lie in (0, 180]",
                self.gate_deg
            )));
        }
        let ospa = self
            .ospa_p
            .iter()
            .map(|&p| OspaParams::new(p, self.ospa_c))
            .collect::<doakit::Result<Vec<_>>>()
            .map_err(CliError::usage)?;
        Ok(EvalConfig {
            gate_deg: self.gate_deg,
            ospa,
            pd_per_source: self.pd_per_source,
        })
    }
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    pub fn validate_simulate(&self) -> Result<ArrayGeometry, CliError> {
        let s = &self.simulate;
        if !(1..=6).contains(&s.task) {
            return Err(CliError::Usage(format!(
                "task must be 1..6, got {}",
                s.task
            )));
        }
        if !(s.duration >= 1.0 && s.duration.is_finite()) {
            return Err(CliError::Usage(format!(
                "duration must be ≥ 1 s, got {}",
                s.duration
            )));
        }
        if s.snr_db.is_some_and(|v| !v.is_finite()) {
            return Err(CliError::Usage("SNR must be finite".into()));
        }
        ArrayGeometry::preset(&s.array).map_err(|_| {
            CliError::Usage(format!(
                "unknown array '{}'; presets: {}",
                s.array,
                ArrayGeometry::PRESET_NAMES.join(", ")
            ))
        })
    }

    /// Canonical TOML text of the effective configuration.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

pub fn load_schema(path: Option<&Path>) -> Result<CorpusSchema, CliError> {
    match path {
        Some(p) => CorpusSchema::from_file(p).map_err(CliError::usage),
        None => Ok(CorpusSchema::builtin()),
    }
}

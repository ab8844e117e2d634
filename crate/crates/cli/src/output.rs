//! Manifests and report tables.

use std::path::Path;

use doakit::evaluate::MetricsReport;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::CliError;

/// Provenance written beside every output. Holds no wall-clock time or
/// output path so that repeated runs produce identical bytes.
#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub seed: u64,
    pub config_sha256: String,
    pub inputs: Vec<String>,
    pub config: &'a Config,
}

impl<'a> Manifest<'a> {
    pub fn new(command: &'a str, seed: u64, config: &'a Config, inputs: &[&Path]) -> Self {
        Self {
            tool: "doakit",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            config_sha256: config.hash(),
            inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
            config,
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).map_err(CliError::data)?;
        write_file(path, &(text + "\n"))
    }
}

/// What `evaluate` stores per recording and `report` reads back.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordingMetrics {
    pub recording_id: String,
    pub report: MetricsReport,
}

pub fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

pub fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", path.display())))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn fmt_p(x: f64) -> String {
    x.to_string().replace('.', "_")
}

pub fn metrics_header(report: &MetricsReport) -> Vec<String> {
    let mut h: Vec<String> = [
        "recording_id",
        "azimuth_error_mean_deg",
        "azimuth_error_std_deg",
        "elevation_error_mean_deg",
        "elevation_error_std_deg",
        "p_d",
        "far_recording",
        "far_vap",
        "track_latency_s",
        "undetected_vaps",
        "tfr",
        "valid",
        "false_estimates",
        "missed",
        "breaks",
        "swaps",
    ]
    .map(String::from)
    .to_vec();
    for o in &report.ospa {
        h.push(format!("ospa_p{}_c{}_mean", fmt_p(o.p), fmt_p(o.c)));
        h.push(format!("ospa_p{}_c{}_std", fmt_p(o.p), fmt_p(o.c)));
    }
    h
}

pub fn metrics_row(id: &str, r: &MetricsReport) -> Vec<String> {
    let mut row = vec![
        id.to_string(),
        opt(r.azimuth_error_mean_deg),
        opt(r.azimuth_error_std_deg),
        opt(r.elevation_error_mean_deg),
        opt(r.elevation_error_std_deg),
        opt(r.p_d),
        opt(r.far_recording),
        opt(r.far_vap),
        opt(r.track_latency_s),
        r.undetected_vaps.to_string(),
        opt(r.tfr),
        r.valid.to_string(),
        r.false_estimates.to_string(),
        r.missed.to_string(),
        r.breaks.to_string(),
        r.swaps.to_string(),
    ];
    for o in &r.ospa {
        row.push(o.mean.to_string());
        row.push(o.std.to_string());
    }
    row
}

pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let err = |e: csv::Error| CliError::Data(format!("{}: {e}", path.display()));
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    w.flush()
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Fixed-width summary with one line per recording.
pub fn summary_table(rows: &[(String, &MetricsReport)]) -> String {
    let show = |v: Option<f64>, digits: usize| {
        v.map(|x| format!("{x:.digits$}"))
            .unwrap_or_else(|| "-".into())
    };
    let mut out = format!(
        "{:<24} {:>8} {:>8} {:>6} {:>8} {:>8} {:>7} {:>7}",
        "recording", "az_err", "az_std", "p_d", "FAR", "FAR_vap", "TL", "TFR"
    );
    if let Some((_, r)) = rows.first() {
        for o in &r.ospa {
            out.push_str(&format!(" {:>9}", format!("OSPA{}", o.p)));
        }
    }
    out.push('\n');
    for (id, r) in rows {
        out.push_str(&format!(
            "{:<24} {:>8} {:>8} {:>6} {:>8} {:>8} {:>7} {:>7}",
            id,
            show(r.azimuth_error_mean_deg, 2),
            show(r.azimuth_error_std_deg, 2),
            show(r.p_d, 3),
            show(r.far_recording, 2),
            show(r.far_vap, 2),
            show(r.track_latency_s, 3),
            show(r.tfr, 3),
        ));
        for o in &r.ospa {
            out.push_str(&format!(" {:>9.3}", o.mean));
        }
        out.push('\n');
    }
    out
}

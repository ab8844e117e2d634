//! Per-timestamp association and the per-recording measures.

use serde::{Deserialize, Serialize};

use super::assignment::gated_assignment;
use super::ospa::{mean_std, ospa_series, OspaParams, OspaSeries};
use super::{angular_errors, GroundTruth, Submission, SubmissionRow, VapTable, DEFAULT_GATE_DEG};
use crate::geometry::{wrap, Doa};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub gate_deg: f64,
    pub ospa: Vec<OspaParams>,
    /// Average detection probability per source instead of pooling all
    /// source-timestamps.
    pub pd_per_source: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            gate_deg: DEFAULT_GATE_DEG,
            ospa: vec![
                OspaParams { p: 1.0, c: 30.0 },
                OspaParams { p: 5.0, c: 30.0 },
            ],
            pd_per_source: false,
        }
    }
}

/// A source matched to an estimate within the gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidPair {
    pub source: usize,
    pub estimate_id: u32,
    /// Signed azimuth error, radians.
    pub azimuth_error: f64,
    /// Elevation error, radians, when the estimate carries an elevation.
    pub elevation_error: Option<f64>,
}

/// Association outcome at one timestamp.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TimestampAssociation {
    pub time: f64,
    pub valid: Vec<ValidPair>,
    /// Ids of unassociated estimates.
    pub false_ids: Vec<u32>,
    /// Unassociated active sources.
    pub missed: Vec<usize>,
}

impl TimestampAssociation {
    pub fn id_of(&self, source: usize) -> Option<u32> {
        self.valid
            .iter()
            .find(|p| p.source == source)
            .map(|p| p.estimate_id)
    }
}

/// Gates on `|d_φ| ≤ gate_deg` and assigns with Munkres on `|d_φ|` in degrees.
pub fn gate_and_associate(
    time: f64,
    truth: &[(usize, Doa)],
    estimates: &[SubmissionRow],
    gate_deg: f64,
) -> TimestampAssociation {
    let cost: Vec<Vec<f64>> = truth
        .iter()
        .map(|(_, d)| {
            estimates
                .iter()
                .map(|e| wrap(d.azimuth() - e.azimuth).abs().to_degrees())
                .collect()
        })
        .collect();
    let pairs = gated_assignment(&cost, gate_deg).expect("rectangular cost matrix");
    let mut source_used = vec![false; truth.len()];
    let mut est_used = vec![false; estimates.len()];
    let mut valid = Vec::with_capacity(pairs.len());
    for (i, j) in pairs {
        source_used[i] = true;
        est_used[j] = true;
        let (n, d) = truth[i];
        let e = &estimates[j];
        let est_doa = Doa::new(e.azimuth, e.elevation.unwrap_or(d.elevation()));
        let (az, el) = angular_errors(&d, &est_doa);
        valid.push(ValidPair {
            source: n,
            estimate_id: e.source_id,
            azimuth_error: az,
            elevation_error: e.elevation.map(|_| el),
        });
    }
    TimestampAssociation {
        time,
        valid,
        false_ids: estimates
            .iter()
            .zip(&est_used)
            .filter(|(_, &u)| !u)
            .map(|(e, _)| e.source_id)
            .collect(),
        missed: truth
            .iter()
            .zip(&source_used)
            .filter(|(_, &u)| !u)
            .map(|((n, _), _)| *n)
            .collect(),
    }
}

/// Broken tracks and identity swaps at one timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Fragmentation {
    pub breaks: usize,
    pub swaps: usize,
}

/// A swap at `t` needs association at `t−1` and `t` under different ids.
/// A break needs association at `t−1`, none at `t`, and both inside one VAP
/// of that source.
pub fn detect_fragmentation(assoc: &[TimestampAssociation], vaps: &VapTable) -> Vec<Fragmentation> {
    let mut out = vec![Fragmentation::default(); assoc.len()];
    for i in 1..assoc.len() {
        let (prev, cur) = (&assoc[i - 1], &assoc[i]);
        for n in 0..vaps.source_count() {
            match (prev.id_of(n), cur.id_of(n)) {
                (Some(a), Some(b)) if a != b => out[i].swaps += 1,
                (Some(_), None) => {
                    let same_vap = vaps.periods(n).iter().any(|&(s, e)| {
                        s <= prev.time && prev.time <= e && s <= cur.time && cur.time <= e
                    });
                    if same_vap {
                        out[i].breaks += 1;
                    }
                }
                _ => {}
            }
        }
    }
    out
}

/// Per-VAP detail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VapReport {
    /// Zero-based source index; submissions label it `source + 1`.
    pub source: usize,
    pub index: usize,
    pub start: f64,
    pub end: f64,
    pub timestamps: usize,
    /// Validly associated timestamps (`L_valid`).
    pub valid: usize,
    /// Mean absolute azimuth error over valid timestamps, degrees (`Δ_valid`).
    pub mean_azimuth_error_deg: Option<f64>,
    pub latency_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OspaSummary {
    pub p: f64,
    pub c: f64,
    pub mean: f64,
    pub std: f64,
}

/// Aggregate measures for one recording. Rate measures are `None` when
/// their denominator is zero; error statistics are `None` without valid pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub azimuth_error_mean_deg: Option<f64>,
    pub azimuth_error_std_deg: Option<f64>,
    pub elevation_error_mean_deg: Option<f64>,
    pub elevation_error_std_deg: Option<f64>,
    pub p_d: Option<f64>,
    pub far_recording: Option<f64>,
    pub far_vap: Option<f64>,
    pub track_latency_s: Option<f64>,
    pub undetected_vaps: usize,
    pub tfr: Option<f64>,
    pub valid: usize,
    pub false_estimates: usize,
    pub missed: usize,
    pub breaks: usize,
    pub swaps: usize,
    pub ospa: Vec<OspaSummary>,
    pub vaps: Vec<VapReport>,
}

/// Measures from an association sequence on `clock`.
pub fn compute_metrics(
    assoc: &[TimestampAssociation],
    vaps: &VapTable,
    clock: &[f64],
    recording_duration: f64,
    pd_per_source: bool,
) -> Result<MetricsReport> {
    if assoc.len() != clock.len() {
        return Err(Error::invalid(
            "one association record per clock tick required",
        ));
    }
    let frag = detect_fragmentation(assoc, vaps);
    let breaks = frag.iter().map(|f| f.breaks).sum::<usize>();
    let swaps = frag.iter().map(|f| f.swaps).sum::<usize>();

    let mut az = Vec::new();
    let mut el = Vec::new();
    for a in assoc {
        for p in &a.valid {
            az.push(p.azimuth_error.abs().to_degrees());
            if let Some(e) = p.elevation_error {
                el.push(e.abs().to_degrees());
            }
        }
    }
    let stats = |v: &[f64]| {
        if v.is_empty() {
            (None, None)
        } else {
            let (m, s) = mean_std(v);
            (Some(m), Some(s))
        }
    };
    let (az_mean, az_std) = stats(&az);
    let (el_mean, el_std) = stats(&el);

    let mut reports = Vec::new();
    let mut per_source = vec![(0usize, 0usize); vaps.source_count()];
    for n in 0..vaps.source_count() {
        for (index, &(start, end)) in vaps.periods(n).iter().enumerate() {
            let ticks: Vec<usize> = (0..clock.len())
                .filter(|&i| start <= clock[i] && clock[i] <= end)
                .collect();
            let errs: Vec<f64> = ticks
                .iter()
                .filter_map(|&i| assoc[i].valid.iter().find(|p| p.source == n))
                .map(|p| p.azimuth_error.abs().to_degrees())
                .collect();
            let first = ticks.iter().find(|&&i| assoc[i].id_of(n).is_some());
            per_source[n].0 += errs.len();
            per_source[n].1 += ticks.len();
            reports.push(VapReport {
                source: n,
                index,
                start,
                end,
                timestamps: ticks.len(),
                valid: errs.len(),
                mean_azimuth_error_deg: (!errs.is_empty()).then(|| mean_std(&errs).0),
                // onset is the first tick of the period, so a detection there has zero latency
                latency_s: first.map(|&i| clock[i] - clock[ticks[0]]),
            });
        }
    }

    let vap_duration = vaps.total_duration();
    let defined = vap_duration > 0.0;
    let p_d = if !defined {
        None
    } else if pd_per_source {
        let ratios: Vec<f64> = per_source
            .iter()
            .filter(|(_, t)| *t > 0)
            .map(|&(v, t)| v as f64 / t as f64)
            .collect();
        (!ratios.is_empty()).then(|| mean_std(&ratios).0)
    } else {
        let (v, t) = per_source
            .iter()
            .fold((0, 0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
        (t > 0).then(|| v as f64 / t as f64)
    };

    let false_total: usize = assoc.iter().map(|a| a.false_ids.len()).sum();
    let false_in_vap: usize = assoc
        .iter()
        .filter(|a| vaps.any_active(a.time))
        .map(|a| a.false_ids.len())
        .sum();
    let latencies: Vec<f64> = reports.iter().filter_map(|r| r.latency_s).collect();
    let undetected = reports.iter().filter(|r| r.latency_s.is_none()).count();

    Ok(MetricsReport {
        azimuth_error_mean_deg: az_mean,
        azimuth_error_std_deg: az_std,
        elevation_error_mean_deg: el_mean,
        elevation_error_std_deg: el_std,
        p_d,
        far_recording: (recording_duration > 0.0).then(|| false_total as f64 / recording_duration),
        far_vap: defined.then(|| false_in_vap as f64 / vap_duration),
        track_latency_s: (defined && !latencies.is_empty()).then(|| mean_std(&latencies).0),
        undetected_vaps: undetected,
        tfr: defined.then(|| (breaks + swaps) as f64 / vap_duration),
        valid: az.len(),
        false_estimates: false_total,
        missed: assoc.iter().map(|a| a.missed.len()).sum(),
        breaks,
        swaps,
        ospa: Vec::new(),
        vaps: reports,
    })
}

/// Full evaluation of one submission.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: MetricsReport,
    pub associations: Vec<TimestampAssociation>,
    pub ospa: Vec<OspaSeries>,
}

pub fn evaluate_recording(
    truth: &GroundTruth,
    submission: &Submission,
    config: &EvalConfig,
) -> Result<Evaluation> {
    let clock = truth.clock();
    let grouped = submission.on_clock(clock)?;
    let mut associations = Vec::with_capacity(clock.len());
    let mut truth_sets = Vec::with_capacity(clock.len());
    let mut est_sets = Vec::with_capacity(clock.len());
    for (i, rows) in grouped.iter().enumerate() {
        let active = truth.active_at(i);
        associations.push(gate_and_associate(clock[i], &active, rows, config.gate_deg));
        truth_sets.push(active.iter().map(|(_, d)| d.azimuth()).collect::<Vec<_>>());
        est_sets.push(rows.iter().map(|r| r.azimuth).collect::<Vec<_>>());
    }
    let mut report = compute_metrics(
        &associations,
        truth.vaps(),
        clock,
        truth.duration(),
        config.pd_per_source,
    )?;
    let mut series = Vec::with_capacity(config.ospa.len());
    for &params in &config.ospa {
        let s = ospa_series(&truth_sets, &est_sets, OspaParams::new(params.p, params.c)?)?;
        report.ospa.push(OspaSummary {
            p: params.p,
            c: params.c,
            mean: s.mean,
            std: s.std,
        });
        series.push(s);
    }
    Ok(Evaluation {
        report,
        associations,
        ospa: series,
    })
}

/// Unweighted mean over recordings of every scalar measure that is defined.
pub fn aggregate(reports: &[MetricsReport]) -> Option<MetricsReport> {
    let first = reports.first()?;
    let mean = |f: &dyn Fn(&MetricsReport) -> Option<f64>| {
        let v: Vec<f64> = reports.iter().filter_map(f).collect();
        (!v.is_empty()).then(|| mean_std(&v).0)
    };
    let sum = |f: &dyn Fn(&MetricsReport) -> usize| reports.iter().map(f).sum();
    Some(MetricsReport {
        azimuth_error_mean_deg: mean(&|r| r.azimuth_error_mean_deg),
        azimuth_error_std_deg: mean(&|r| r.azimuth_error_std_deg),
        elevation_error_mean_deg: mean(&|r| r.elevation_error_mean_deg),
        elevation_error_std_deg: mean(&|r| r.elevation_error_std_deg),
        p_d: mean(&|r| r.p_d),
        far_recording: mean(&|r| r.far_recording),
        far_vap: mean(&|r| r.far_vap),
        track_latency_s: mean(&|r| r.track_latency_s),
        undetected_vaps: sum(&|r| r.undetected_vaps),
        tfr: mean(&|r| r.tfr),
        valid: sum(&|r| r.valid),
        false_estimates: sum(&|r| r.false_estimates),
        missed: sum(&|r| r.missed),
        breaks: sum(&|r| r.breaks),
        swaps: sum(&|r| r.swaps),
        ospa: first
            .ospa
            .iter()
            .enumerate()
            .map(|(k, o)| OspaSummary {
                p: o.p,
                c: o.c,
                mean: mean_std(
                    &reports
                        .iter()
                        .filter_map(|r| r.ospa.get(k).map(|x| x.mean))
                        .collect::<Vec<_>>(),
                )
                .0,
                std: mean_std(
                    &reports
                        .iter()
                        .filter_map(|r| r.ospa.get(k).map(|x| x.std))
                        .collect::<Vec<_>>(),
                )
                .0,
            })
            .collect(),
        vaps: Vec::new(),
    })
}

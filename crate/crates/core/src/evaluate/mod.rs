//! Evaluation harness: VAP alignment, gating, association, per-recording
//! measures and OSPA.
//!
//! Association cost is the absolute azimuth error in degrees; elevation
//! errors are reported for valid pairs only. All in-memory angles are
//! radians; reported errors are degrees.

mod assignment;
mod metrics;
mod ospa;

use serde::{Deserialize, Serialize};

use crate::geometry::{global_to_local, wrap, Doa, Trajectory};
use crate::localize::DoaEstimate;
use crate::{Error, Result};

pub use assignment::{gated_assignment, munkres, Assignment};
pub use metrics::{
    aggregate, compute_metrics, detect_fragmentation, evaluate_recording, gate_and_associate,
    EvalConfig, Evaluation, Fragmentation, MetricsReport, OspaSummary, TimestampAssociation,
    ValidPair, VapReport,
};
pub use ospa::{cutoff_distance, ospa, ospa_series, OspaParams, OspaSeries};

/// Default association gate, degrees.
pub const DEFAULT_GATE_DEG: f64 = 30.0;

/// Tolerance for matching submission timestamps to the evaluation clock, seconds.
pub const CLOCK_TOLERANCE_S: f64 = 1e-6;

/// Signed azimuth error `wrap(φ − φ̂)` and plain elevation error `θ − θ̂`.
pub fn angular_errors(truth: &Doa, estimate: &Doa) -> (f64, f64) {
    (
        wrap(truth.azimuth() - estimate.azimuth()),
        truth.elevation() - estimate.elevation(),
    )
}

/// Voice-activity periods per source, as closed intervals in seconds.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct VapTable {
    periods: Vec<Vec<(f64, f64)>>,
}

impl VapTable {
    pub fn new(periods: Vec<Vec<(f64, f64)>>) -> Result<Self> {
        for (n, list) in periods.iter().enumerate() {
            for (a, &(s, e)) in list.iter().enumerate() {
                if !(s.is_finite() && e.is_finite() && e > s) {
                    return Err(Error::invalid(format!(
                        "source {n} period {a}: end must exceed start"
                    )));
                }
                if a > 0 && s <= list[a - 1].1 {
                    return Err(Error::invalid(format!(
                        "source {n} period {a} overlaps or precedes its predecessor"
                    )));
                }
            }
        }
        Ok(Self { periods })
    }

    pub fn source_count(&self) -> usize {
        self.periods.len()
    }

    pub fn periods(&self, source: usize) -> &[(f64, f64)] {
        &self.periods[source]
    }

    pub fn all(&self) -> &[Vec<(f64, f64)>] {
        &self.periods
    }

    pub fn is_active(&self, source: usize, t: f64) -> bool {
        self.periods[source].iter().any(|&(s, e)| s <= t && t <= e)
    }

    pub fn any_active(&self, t: f64) -> bool {
        (0..self.source_count()).any(|n| self.is_active(n, t))
    }

    /// Sum of all period durations over all sources.
    pub fn total_duration(&self) -> f64 {
        self.periods.iter().flatten().map(|(s, e)| e - s).sum()
    }
}

/// Shifts each period boundary by the source-to-array propagation delay at
/// that instant. Distance is measured to the array frame origin.
pub fn align_vaps(
    vaps: &VapTable,
    sources: &[Trajectory],
    array: &Trajectory,
    c: f64,
) -> Result<VapTable> {
    if sources.len() != vaps.source_count() {
        return Err(Error::invalid(format!(
            "{} source trajectories for {} VAP lists",
            sources.len(),
            vaps.source_count()
        )));
    }
    let delay = |n: usize, t: f64| -> Result<f64> {
        let s = sources[n].position_at(t)?;
        let a = array.position_at(t)?;
        Ok((s - a).norm() / c)
    };
    let mut out = Vec::with_capacity(vaps.source_count());
    for (n, list) in vaps.all().iter().enumerate() {
        let mut shifted = Vec::with_capacity(list.len());
        for &(s, e) in list {
            shifted.push((s + delay(n, s)?, e + delay(n, e)?));
        }
        out.push(shifted);
    }
    VapTable::new(out)
}

/// One submitted estimate. Angles in radians; elevation uses the
/// inclination convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubmissionRow {
    pub time: f64,
    pub source_id: u32,
    pub azimuth: f64,
    pub elevation: Option<f64>,
}

/// Time-ordered estimates with unique `(time, id)` keys and ids ≥ 1.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Submission {
    rows: Vec<SubmissionRow>,
}

impl Submission {
    pub fn new(rows: Vec<SubmissionRow>) -> Result<Self> {
        for (i, r) in rows.iter().enumerate() {
            if r.source_id == 0 {
                return Err(Error::Format(format!("row {i}: source ids start at 1")));
            }
            if !r.time.is_finite()
                || !r.azimuth.is_finite()
                || r.elevation.is_some_and(|e| !e.is_finite())
            {
                return Err(Error::Format(format!("row {i}: non-finite value")));
            }
            if i > 0 {
                let p = &rows[i - 1];
                if r.time < p.time - CLOCK_TOLERANCE_S {
                    return Err(Error::Format(format!(
                        "row {i}: timestamp {} precedes {}",
                        r.time, p.time
                    )));
                }
                let same_tick = (r.time - p.time).abs() <= CLOCK_TOLERANCE_S;
                if same_tick
                    && rows[..i]
                        .iter()
                        .rev()
                        .take_while(|q| (r.time - q.time).abs() <= CLOCK_TOLERANCE_S)
                        .any(|q| q.source_id == r.source_id)
                {
                    return Err(Error::Format(format!(
                        "row {i}: duplicate estimate for id {} at {} s",
                        r.source_id, r.time
                    )));
                }
            }
        }
        Ok(Self { rows })
    }

    pub fn from_estimates(estimates: &[DoaEstimate]) -> Result<Self> {
        Self::new(
            estimates
                .iter()
                .map(|e| SubmissionRow {
                    time: e.timestamp,
                    source_id: e.source_id,
                    azimuth: e.doa.azimuth(),
                    elevation: Some(e.doa.elevation()),
                })
                .collect(),
        )
    }

    pub fn rows(&self) -> &[SubmissionRow] {
        &self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows grouped by clock tick. Fails on the first timestamp that is not
    /// on the clock.
    pub fn on_clock(&self, clock: &[f64]) -> Result<Vec<Vec<SubmissionRow>>> {
        let mut out = vec![Vec::new(); clock.len()];
        for r in &self.rows {
            let i = clock.partition_point(|&t| t < r.time - CLOCK_TOLERANCE_S);
            match clock.get(i) {
                Some(&t) if (t - r.time).abs() <= CLOCK_TOLERANCE_S => out[i].push(*r),
                _ => {
                    return Err(Error::Format(format!(
                        "submission timestamp {} s is not on the evaluation clock",
                        r.time
                    )))
                }
            }
        }
        Ok(out)
    }
}

/// Reference directions on the evaluation clock.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    clock: Vec<f64>,
    /// `doas[n][i]`: direction of source `n` at tick `i`, array frame.
    doas: Vec<Vec<Doa>>,
    vaps: VapTable,
    duration: f64,
}

impl GroundTruth {
    pub fn new(
        clock: Vec<f64>,
        doas: Vec<Vec<Doa>>,
        vaps: VapTable,
        duration: f64,
    ) -> Result<Self> {
        if clock.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid(
                "evaluation clock must be strictly increasing",
            ));
        }
        if doas.len() != vaps.source_count() {
            return Err(Error::invalid("one direction track per VAP list required"));
        }
        if doas.iter().any(|d| d.len() != clock.len()) {
            return Err(Error::invalid(
                "direction tracks must match the clock length",
            ));
        }
        if !(duration >= 0.0) {
            return Err(Error::invalid("recording duration must be ≥ 0"));
        }
        Ok(Self {
            clock,
            doas,
            vaps,
            duration,
        })
    }

    /// Directions from trajectories on `clock`; VAPs are shifted to the array
    /// when `align` is set. The recording duration is the clock span.
    pub fn from_trajectories(
        clock: &[f64],
        array: &Trajectory,
        sources: &[Trajectory],
        vaps: &VapTable,
        c: f64,
        align: bool,
    ) -> Result<Self> {
        let vaps = if align {
            align_vaps(vaps, sources, array, c)?
        } else {
            vaps.clone()
        };
        let mut doas = Vec::with_capacity(sources.len());
        for s in sources {
            let mut track = Vec::with_capacity(clock.len());
            for &t in clock {
                track.push(global_to_local(&s.position_at(t)?, &array.interpolate(t)?)?);
            }
            doas.push(track);
        }
        let span = match (clock.first(), clock.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        };
        Self::new(clock.to_vec(), doas, vaps, span)
    }

    pub fn clock(&self) -> &[f64] {
        &self.clock
    }

    pub fn vaps(&self) -> &VapTable {
        &self.vaps
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn source_count(&self) -> usize {
        self.doas.len()
    }

    pub fn doa(&self, source: usize, tick: usize) -> Doa {
        self.doas[source][tick]
    }

    /// Active sources and their directions at tick `i`.
    pub fn active_at(&self, tick: usize) -> Vec<(usize, Doa)> {
        let t = self.clock[tick];
        (0..self.source_count())
            .filter(|&n| self.vaps.is_active(n, t))
            .map(|n| (n, self.doas[n][tick]))
            .collect()
    }

    /// The truth rendered as a submission: source `n` gets id `n + 1` at
    /// every tick where it is active.
    pub fn as_submission(&self) -> Submission {
        let mut rows = Vec::new();
        for i in 0..self.clock.len() {
            for (n, d) in self.active_at(i) {
                rows.push(SubmissionRow {
                    time: self.clock[i],
                    source_id: n as u32 + 1,
                    azimuth: d.azimuth(),
                    elevation: Some(d.elevation()),
                });
            }
        }
        Submission::new(rows).expect("clock is increasing and ids are unique")
    }
}

//! Submission tables: one CSV row per (timestamp, source id).
//!
//! Time in seconds with 9 decimals, angles in degrees with 6 decimals,
//! azimuth in [−180, 180), elevation (inclination) optional.

use std::fmt::Write as _;
use std::path::Path;

use crate::evaluate::{Submission, SubmissionRow};
use crate::localize::DoaEstimate;
use crate::{Error, Result};

pub const SUBMISSION_HEADER: &str = "time_s,source_id,azimuth_deg,elevation_deg";

fn degrees(rad: f64) -> String {
    let s = format!("{:.6}", rad.to_degrees());
    match s.as_str() {
        "180.000000" => "-180.000000".into(),
        "-0.000000" => "0.000000".into(),
        _ => s,
    }
}

pub fn format_submission(submission: &Submission) -> String {
    let mut out = String::from(SUBMISSION_HEADER);
    out.push('\n');
    for r in submission.rows() {
        let el = r.elevation.map(degrees).unwrap_or_default();
        writeln!(
            out,
            "{:.9},{},{},{}",
            r.time,
            r.source_id,
            degrees(r.azimuth),
            el
        )
        .unwrap();
    }
    out
}

/// Parses a submission table; `file` only labels errors.
pub fn parse_submission(text: &str, file: &Path) -> Result<Submission> {
    let bad = |line: usize, message: String| Error::Parse {
        file: file.to_path_buf(),
        line,
        message,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    match lines.next() {
        Some((_, h)) if h == SUBMISSION_HEADER => {}
        Some((n, h)) => {
            return Err(bad(
                n,
                format!("expected header '{SUBMISSION_HEADER}', found '{h}'"),
            ))
        }
        None => return Err(bad(1, "empty file, header missing".into())),
    }
    let mut rows: Vec<SubmissionRow> = Vec::new();
    for (n, line) in lines {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 4 {
            return Err(bad(n, format!("expected 4 fields, found {}", f.len())));
        }
        let num = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(n, format!("bad {what} '{s}'")))
        };
        let time = num(f[0], "time")?;
        let source_id: u32 = f[1]
            .parse()
            .map_err(|_| bad(n, format!("bad source id '{}'", f[1])))?;
        if source_id == 0 {
            return Err(bad(n, "source ids start at 1".into()));
        }
        let az = num(f[2], "azimuth")?;
        if !(-180.0..180.0).contains(&az) {
            return Err(bad(n, format!("azimuth {az}° outside [-180, 180)")));
        }
        let elevation = if f[3].is_empty() {
            None
        } else {
            let el = num(f[3], "elevation")?;
            if !(0.0..=180.0).contains(&el) {
                return Err(bad(n, format!("elevation {el}° outside [0, 180]")));
            }
            Some(el.to_radians())
        };
        if let Some(prev) = rows.last() {
            if time < prev.time {
                return Err(bad(n, format!("timestamp {time} precedes {}", prev.time)));
            }
            if rows
                .iter()
                .rev()
                .take_while(|r| r.time == time)
                .any(|r| r.source_id == source_id)
            {
                return Err(bad(
                    n,
                    format!("duplicate row for time {time} and id {source_id}"),
                ));
            }
        }
        rows.push(SubmissionRow {
            time,
            source_id,
            azimuth: az.to_radians(),
            elevation,
        });
    }
    Submission::new(rows)
}

pub fn read_submission(path: &Path) -> Result<Submission> {
    parse_submission(&super::read_text(path)?, path)
}

/// Writes time-ordered estimates, labelled by `source_id`.
pub fn write_submission(estimates: &[DoaEstimate], path: &Path) -> Result<()> {
    let sub = Submission::from_estimates(estimates)?;
    super::write_text(path, &format_submission(&sub))
}

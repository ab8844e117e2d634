//! Header-addressed text tables.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::Rotation3;

use super::schema::{Delimiter, GeometrySchema, PositionSchema, VadFormat, VadSchema};
use crate::geometry::{ArrayGeometry, Mat3, Pose, Trajectory, Vec3};
use crate::{Error, Result};

struct Table {
    path: PathBuf,
    header: Vec<String>,
    /// 1-based line number and fields of each data row.
    rows: Vec<(usize, Vec<String>)>,
}

fn split(line: &str, delim: Delimiter) -> Vec<String> {
    let parts: Vec<&str> = match delim {
        Delimiter::Comma => line.split(',').collect(),
        Delimiter::Tab => line.split('\t').collect(),
        Delimiter::Whitespace | Delimiter::Auto => line.split_whitespace().collect(),
    };
    parts.into_iter().map(|s| s.trim().to_string()).collect()
}

fn read_table(path: &Path, delim: Delimiter) -> Result<Table> {
    let text = super::read_text(path)?;
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    let bad = |line: usize, message: String| Error::Parse {
        file: path.to_path_buf(),
        line,
        message,
    };
    let (_, head) = lines
        .next()
        .ok_or_else(|| bad(1, "missing header line".into()))?;
    let delim = match delim {
        Delimiter::Auto if head.contains(',') => Delimiter::Comma,
        Delimiter::Auto => Delimiter::Whitespace,
        d => d,
    };
    let header = split(head, delim);
    let mut rows = Vec::new();
    for (n, line) in lines {
        let fields = split(line, delim);
        if fields.len() != header.len() {
            return Err(bad(
                n,
                format!("expected {} fields, found {}", header.len(), fields.len()),
            ));
        }
        rows.push((n, fields));
    }
    Ok(Table {
        path: path.to_path_buf(),
        header,
        rows,
    })
}

impl Table {
    fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse {
                file: self.path.clone(),
                line: 1,
                message: format!("no column named '{name}'"),
            })
    }

    fn has(&self, name: &str) -> bool {
        self.header.iter().any(|h| h == name)
    }

    fn number(&self, row: usize, col: usize) -> Result<f64> {
        let (line, fields) = &self.rows[row];
        fields[col]
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::Parse {
                file: self.path.clone(),
                line: *line,
                message: format!(
                    "'{}' is not a finite number (column '{}')",
                    fields[col], self.header[col]
                ),
            })
    }

    fn error(&self, row: usize, message: String) -> Error {
        Error::Parse {
            file: self.path.clone(),
            line: self.rows[row].0,
            message,
        }
    }
}

/// Days since 1970-01-01 of a proleptic Gregorian date.
fn days_from_civil(y: i64, m: i64, d: i64) -> i64 {
    let y = if m <= 2 { y - 1 } else { y };
    let era = y.div_euclid(400);
    let yoe = y - era * 400;
    let doy = (153 * (m + if m > 2 { -3 } else { 9 }) + 2) / 5 + d - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146_097 + doe - 719_468
}

/// `origin + t` as decimal text. Epoch-scale origins leave an f64 with only
/// ~1e-7 s resolution, so the integer seconds are carried separately.
pub(super) fn absolute_time(origin: f64, t: f64) -> String {
    if origin == 0.0 {
        return t.to_string();
    }
    let mut whole = origin.trunc();
    let mut rem = origin - whole + t;
    let k = rem.floor();
    whole += k;
    rem -= k;
    let (sign, whole, rem) = if whole < 0.0 && rem > 0.0 {
        ("-", -whole - 1.0, 1.0 - rem)
    } else if whole < 0.0 {
        ("-", -whole, 0.0)
    } else {
        ("", whole, rem)
    };
    let mut digits = format!("{rem:.12}");
    let whole = if digits.starts_with('1') {
        digits = "0.0".into();
        whole + 1.0
    } else {
        whole
    };
    let frac = digits[2..].trim_end_matches('0');
    format!("{sign}{whole}.{}", if frac.is_empty() { "0" } else { frac })
}

/// Plain decimal `text` minus `origin`, without forming the absolute value
/// as an f64. `None` for exponent notation or unparsable text.
pub(super) fn offset_seconds(text: &str, origin: f64) -> Option<f64> {
    if text.contains(['e', 'E']) {
        return None;
    }
    let (sign, body) = match text.strip_prefix('-') {
        Some(b) => (-1.0, b),
        None => (1.0, text.strip_prefix('+').unwrap_or(text)),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if !int.bytes().all(|b| b.is_ascii_digit())
        || int.len() > 15
        || (int.is_empty() && frac.is_empty())
    {
        return None;
    }
    let int: f64 = if int.is_empty() {
        0.0
    } else {
        int.parse().ok()?
    };
    let frac: f64 = if frac.is_empty() {
        0.0
    } else {
        format!("0.{frac}").parse().ok()?
    };
    let o = origin.trunc();
    Some((sign * int - o) + (sign * frac - (origin - o)))
}

pub(super) fn read_positions(
    path: &Path,
    schema: &PositionSchema,
    origin: f64,
) -> Result<Trajectory> {
    let table = read_table(path, schema.delimiter)?;
    let time_cols = schema
        .time
        .iter()
        .map(|c| table.column(c))
        .collect::<Result<Vec<_>>>()?;
    let pos_cols = schema
        .position
        .iter()
        .map(|c| table.column(c))
        .collect::<Result<Vec<_>>>()?;
    let rot_cols = match &schema.rotation {
        Some(names) if names.iter().all(|c| table.has(c)) => Some(
            names
                .iter()
                .map(|c| table.column(c))
                .collect::<Result<Vec<_>>>()?,
        ),
        _ => None,
    };
    let mut poses = Vec::with_capacity(table.rows.len());
    for r in 0..table.rows.len() {
        let t = if time_cols.len() == 1 {
            let text = &table.rows[r].1[time_cols[0]];
            match offset_seconds(text, origin) {
                Some(t) => t,
                None => table.number(r, time_cols[0])? - origin,
            }
        } else {
            let v = time_cols
                .iter()
                .map(|&c| table.number(r, c))
                .collect::<Result<Vec<_>>>()?;
            let days = days_from_civil(v[0] as i64, v[1] as i64, v[2] as i64);
            days as f64 * 86_400.0 + v[3] * 3600.0 + v[4] * 60.0 + v[5] - origin
        };
        let p = Vec3::new(
            table.number(r, pos_cols[0])?,
            table.number(r, pos_cols[1])?,
            table.number(r, pos_cols[2])?,
        );
        let rot = match &rot_cols {
            Some(cols) => {
                let v = cols
                    .iter()
                    .map(|&c| table.number(r, c))
                    .collect::<Result<Vec<_>>>()?;
                Mat3::from_row_slice(&v)
            }
            None => Mat3::identity(),
        };
        let pose = Pose::new(p, rot, t).or_else(|_| {
            // measured rotations drift slightly off SO(3)
            if rot.determinant() > 0.5 {
                Pose::new(p, Rotation3::from_matrix(&rot).into_inner(), t)
            } else {
                Err(Error::invalid("not a rotation"))
            }
        });
        poses.push(pose.map_err(|e| table.error(r, format!("bad pose: {e}")))?);
    }
    if poses.is_empty() {
        return Err(Error::Parse {
            file: path.to_path_buf(),
            line: 2,
            message: "no data rows".into(),
        });
    }
    if let Some(r) = poses
        .windows(2)
        .position(|w| !(w[1].timestamp() > w[0].timestamp()))
    {
        return Err(table.error(r + 1, "timestamps must increase strictly".into()));
    }
    Trajectory::new(poses, schema.rate_hz)
}

pub(super) fn format_positions(traj: &Trajectory, rotation: bool, origin: f64) -> String {
    let mut out = String::from("time x y z");
    if rotation {
        out.push_str(" r11 r12 r13 r21 r22 r23 r31 r32 r33");
    }
    out.push('\n');
    for p in traj.samples() {
        let t = p.translation();
        write!(
            out,
            "{} {} {} {}",
            absolute_time(origin, p.timestamp()),
            t[0],
            t[1],
            t[2]
        )
        .unwrap();
        if rotation {
            let r = p.rotation();
            for i in 0..3 {
                for j in 0..3 {
                    write!(out, " {}", r[(i, j)]).unwrap();
                }
            }
        }
        out.push('\n');
    }
    out
}

pub(super) fn read_geometry(
    path: &Path,
    name: &str,
    schema: &GeometrySchema,
) -> Result<ArrayGeometry> {
    let table = read_table(path, schema.delimiter)?;
    let cols = schema
        .position
        .iter()
        .map(|c| table.column(c))
        .collect::<Result<Vec<_>>>()?;
    let mut mics = Vec::with_capacity(table.rows.len());
    for r in 0..table.rows.len() {
        mics.push(Vec3::new(
            table.number(r, cols[0])?,
            table.number(r, cols[1])?,
            table.number(r, cols[2])?,
        ));
    }
    ArrayGeometry::new(name, mics).map_err(|e| Error::Parse {
        file: path.to_path_buf(),
        line: 1,
        message: e.to_string(),
    })
}

pub(super) fn format_geometry(geometry: &ArrayGeometry) -> String {
    let mut out = String::from("x y z\n");
    for m in geometry.mic_positions() {
        writeln!(out, "{} {} {}", m[0], m[1], m[2]).unwrap();
    }
    out
}

pub(super) fn read_vad(
    path: &Path,
    schema: &VadSchema,
    sample_rate_hz: f64,
) -> Result<Vec<(f64, f64)>> {
    let table = read_table(path, schema.delimiter)?;
    let mut out = Vec::new();
    match schema.format {
        VadFormat::Intervals => {
            let (a, b) = (table.column(&schema.start)?, table.column(&schema.end)?);
            for r in 0..table.rows.len() {
                let (s, e) = (table.number(r, a)?, table.number(r, b)?);
                if !(s < e) || out.last().is_some_and(|&(_, prev)| s < prev) {
                    return Err(table.error(
                        r,
                        format!("period ({s}, {e}) is empty or overlaps the previous one"),
                    ));
                }
                out.push((s, e));
            }
        }
        VadFormat::Samples => {
            let c = table.column(&schema.value)?;
            let mut start = None;
            for r in 0..table.rows.len() {
                let on = match table.number(r, c)? {
                    v if v == 0.0 => false,
                    v if v == 1.0 => true,
                    v => {
                        return Err(table.error(r, format!("activity flag {v} is neither 0 nor 1")))
                    }
                };
                match (on, start) {
                    (true, None) => start = Some(r),
                    (false, Some(s)) => {
                        out.push((s as f64 / sample_rate_hz, (r - 1) as f64 / sample_rate_hz));
                        start = None;
                    }
                    _ => {}
                }
            }
            if let Some(s) = start {
                out.push((
                    s as f64 / sample_rate_hz,
                    (table.rows.len() - 1) as f64 / sample_rate_hz,
                ));
            }
            out.retain(|(a, b)| b > a);
        }
    }
    Ok(out)
}

pub(super) fn format_vad(periods: &[(f64, f64)]) -> String {
    let mut out = String::from("start end\n");
    for (a, b) in periods {
        writeln!(out, "{a} {b}").unwrap();
    }
    out
}

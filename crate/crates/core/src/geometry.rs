//! Coordinate frames, microphone-array presets, pose trajectories and
//! angular arithmetic.
//!
//! Conventions used throughout the crate:
//!
//! * azimuth is measured counter-clockwise from the local +x axis and is
//!   kept in `[-π, π)`;
//! * elevation is the inclination from the local +z axis, in `[0, π]`
//!   (`π/2` is the horizontal plane);
//! * a direction maps to the unit vector
//!   `(sin θ cos φ, sin θ sin φ, cos θ)`.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Default speed of sound in m/s.
pub const SPEED_OF_SOUND: f64 = 343.0;

/// Rate of the ground-truth positional data (and of the evaluation clock).
pub const GROUND_TRUTH_RATE_HZ: f64 = 120.0;

const ORTHONORMAL_TOL: f64 = 1e-9;
const COINCIDENT_TOL: f64 = 1e-6;

/// Wraps an angle into `[-π, π)`.
pub fn wrap_angle(angle: f64) -> Result<f64> {
    if !angle.is_finite() {
        return Err(Error::Domain(format!(
            "cannot wrap non-finite angle {angle}"
        )));
    }
    Ok(wrap(angle))
}

/// Infallible wrap for values already known to be finite.
pub(crate) fn wrap(angle: f64) -> f64 {
    let mut r = (angle + PI).rem_euclid(TAU) - PI;
    // rem_euclid may round up to TAU for tiny negative inputs
    if r >= PI {
        r -= TAU;
    }
    if r < -PI {
        r = -PI;
    }
    r
}

/// Direction of arrival in an array's local frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Doa {
    azimuth: f64,
    elevation: f64,
}

impl Doa {
    /// Builds a direction, wrapping the azimuth and clamping the elevation.
    ///
    /// Both angles must be finite; use [`Doa::try_new`] for unchecked input.
    pub fn new(azimuth: f64, elevation: f64) -> Self {
        debug_assert!(azimuth.is_finite() && elevation.is_finite());
        Self {
            azimuth: wrap(azimuth),
            elevation: elevation.clamp(0.0, PI),
        }
    }

    pub fn try_new(azimuth: f64, elevation: f64) -> Result<Self> {
        if !elevation.is_finite() {
            return Err(Error::Domain(format!("non-finite elevation {elevation}")));
        }
        Ok(Self {
            azimuth: wrap_angle(azimuth)?,
            elevation: elevation.clamp(0.0, PI),
        })
    }

    /// A direction in the horizontal plane.
    pub fn horizontal(azimuth: f64) -> Self {
        Self::new(azimuth, PI / 2.0)
    }

    pub fn azimuth(&self) -> f64 {
        self.azimuth
    }

    pub fn elevation(&self) -> f64 {
        self.elevation
    }

    pub fn to_unit_vector(&self) -> Vec3 {
        doa_to_unit_vector(*self)
    }

    /// Direction of a nonzero vector.
    pub fn from_vector(v: &Vec3) -> Result<Self> {
        let norm = v.norm();
        if !(norm > COINCIDENT_TOL) || !norm.is_finite() {
            return Err(Error::DegenerateGeometry(format!(
                "cannot take the direction of a vector with norm {norm}"
            )));
        }
        let u = v / norm;
        Ok(Self::new(u.y.atan2(u.x), u.z.clamp(-1.0, 1.0).acos()))
    }

    /// Great-circle angle to another direction, radians.
    pub fn angle_to(&self, other: &Doa) -> f64 {
        let d = self.to_unit_vector().dot(&other.to_unit_vector());
        d.clamp(-1.0, 1.0).acos()
    }
}

pub fn doa_to_unit_vector(d: Doa) -> Vec3 {
    let (st, ct) = d.elevation.sin_cos();
    let (sp, cp) = d.azimuth.sin_cos();
    Vec3::new(st * cp, st * sp, ct)
}

/// Position and orientation of a local frame in the global frame at one
/// instant. Local points map to global ones as `R·x + t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    translation: Vec3,
    rotation: Mat3,
    timestamp: f64,
}

impl Pose {
    pub fn new(translation: Vec3, rotation: Mat3, timestamp: f64) -> Result<Self> {
        check_rotation(&rotation)?;
        if !timestamp.is_finite() || !translation.iter().all(|x| x.is_finite()) {
            return Err(Error::Domain("pose with non-finite values".into()));
        }
        Ok(Self {
            translation,
            rotation,
            timestamp,
        })
    }

    pub fn identity(timestamp: f64) -> Self {
        Self {
            translation: Vec3::zeros(),
            rotation: Mat3::identity(),
            timestamp,
        }
    }

    /// Pose at `translation` rotated by `yaw` radians about +z.
    pub fn from_yaw(translation: Vec3, yaw: f64, timestamp: f64) -> Self {
        Self {
            translation,
            rotation: *Rotation3::from_axis_angle(&Vector3::z_axis(), yaw).matrix(),
            timestamp,
        }
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn rotation(&self) -> &Mat3 {
        &self.rotation
    }

    pub fn timestamp(&self) -> f64 {
        self.timestamp
    }

    pub(crate) fn with_timestamp(mut self, timestamp: f64) -> Self {
        self.timestamp = timestamp;
        self
    }

    /// Maps a point from this pose's local frame to the global frame.
    pub fn local_to_global(&self, local: &Vec3) -> Vec3 {
        self.rotation * local + self.translation
    }

    /// Maps a global point into this pose's local frame.
    pub fn global_to_local_point(&self, global: &Vec3) -> Vec3 {
        self.rotation.transpose() * (global - self.translation)
    }
}

fn check_rotation(r: &Mat3) -> Result<()> {
    let err = (r.transpose() * r - Mat3::identity()).abs().max();
    let det = r.determinant();
    if !(err <= ORTHONORMAL_TOL) || !((det - 1.0).abs() <= ORTHONORMAL_TOL) {
        return Err(Error::Domain(format!(
            "rotation is not proper orthonormal (|RᵀR − I| = {err:.2e}, det = {det})"
        )));
    }
    Ok(())
}

/// Direction of a global source position seen from an array pose.
pub fn global_to_local(source_pos: &Vec3, array_pose: &Pose) -> Result<Doa> {
    let local = array_pose.global_to_local_point(source_pos);
    if local.norm() <= COINCIDENT_TOL {
        return Err(Error::DegenerateGeometry(
            "source coincides with the array origin".into(),
        ));
    }
    Doa::from_vector(&local)
}

/// Time-ordered poses sampled at a nominal rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    samples: Vec<Pose>,
    rate_hz: f64,
}

impl Trajectory {
    pub fn new(samples: Vec<Pose>, rate_hz: f64) -> Result<Self> {
        if !(rate_hz > 0.0) {
            return Err(Error::invalid(format!(
                "trajectory rate {rate_hz} must be > 0"
            )));
        }
        if samples.is_empty() {
            return Err(Error::invalid("trajectory needs at least one pose"));
        }
        if let Some(w) = samples
            .windows(2)
            .find(|w| !(w[1].timestamp > w[0].timestamp))
        {
            return Err(Error::invalid(format!(
                "trajectory timestamps not strictly increasing at {} s",
                w[1].timestamp
            )));
        }
        Ok(Self { samples, rate_hz })
    }

    /// A fixed pose repeated at `rate_hz` over `[0, duration]`.
    pub fn constant(pose: &Pose, duration: f64, rate_hz: f64) -> Result<Self> {
        Self::from_fn(duration, rate_hz, |t| pose.clone().with_timestamp(t))
    }

    /// Samples `pose_at(t)` on the grid `k / rate_hz` covering `[0, duration]`.
    pub fn from_fn(
        duration: f64,
        rate_hz: f64,
        mut pose_at: impl FnMut(f64) -> Pose,
    ) -> Result<Self> {
        if !(duration >= 0.0) || !(rate_hz > 0.0) {
            return Err(Error::invalid("trajectory needs duration ≥ 0 and rate > 0"));
        }
        let n = clock_len(duration, rate_hz);
        let samples = (0..n)
            .map(|k| pose_at(k as f64 / rate_hz).with_timestamp(k as f64 / rate_hz))
            .collect();
        Self::new(samples, rate_hz)
    }

    pub fn samples(&self) -> &[Pose] {
        &self.samples
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn start_time(&self) -> f64 {
        self.samples[0].timestamp
    }

    pub fn end_time(&self) -> f64 {
        self.samples[self.samples.len() - 1].timestamp
    }

    pub fn timestamps(&self) -> Vec<f64> {
        self.samples.iter().map(|p| p.timestamp).collect()
    }

    /// True if every pose equals the first one (ignoring timestamps).
    pub fn is_constant(&self) -> bool {
        let first = &self.samples[0];
        self.samples
            .iter()
            .all(|p| p.translation == first.translation && p.rotation == first.rotation)
    }

    pub fn interpolate(&self, t: f64) -> Result<Pose> {
        interpolate_pose(self, t)
    }

    /// Translation only; cheaper than a full pose when rotation is unused.
    pub fn position_at(&self, t: f64) -> Result<Vec3> {
        let (i, s) = self.locate(t)?;
        let a = &self.samples[i];
        if s == 0.0 {
            return Ok(a.translation);
        }
        let b = &self.samples[i + 1];
        Ok(a.translation + (b.translation - a.translation) * s)
    }

    fn locate(&self, t: f64) -> Result<(usize, f64)> {
        let (start, end) = (self.start_time(), self.end_time());
        if !(t >= start && t <= end) {
            return Err(Error::OutOfRange { t, start, end });
        }
        let i = self.samples.partition_point(|p| p.timestamp <= t) - 1;
        if i + 1 == self.samples.len() || self.samples[i].timestamp == t {
            return Ok((i, 0.0));
        }
        let (t0, t1) = (self.samples[i].timestamp, self.samples[i + 1].timestamp);
        Ok((i, (t - t0) / (t1 - t0)))
    }
}

/// Number of samples of a clock at `rate_hz` covering `[0, duration]`.
pub fn clock_len(duration: f64, rate_hz: f64) -> usize {
    // tolerate rounding so that e.g. 10 s at 120 Hz gives exactly 1201 ticks
    (duration * rate_hz - 1e-9).ceil().max(0.0) as usize + 1
}

/// Pose at time `t`: translation interpolated linearly, rotation along the
/// geodesic between the bracketing samples. No extrapolation.
pub fn interpolate_pose(traj: &Trajectory, t: f64) -> Result<Pose> {
    let (i, s) = traj.locate(t)?;
    let a = &traj.samples[i];
    if s == 0.0 {
        return Ok(a.clone().with_timestamp(t));
    }
    let b = &traj.samples[i + 1];
    let translation = a.translation + (b.translation - a.translation) * s;
    let rotation = if a.rotation == b.rotation {
        a.rotation
    } else {
        let ra = Rotation3::from_matrix_unchecked(a.rotation);
        let relative = ra.inverse() * Rotation3::from_matrix_unchecked(b.rotation);
        let step = Rotation3::new(relative.scaled_axis() * s);
        *(ra * step).matrix()
    };
    Ok(Pose {
        translation,
        rotation,
        timestamp: t,
    })
}

/// Microphone positions in an array's local frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    name: String,
    mic_positions: Vec<[f64; 3]>,
}

impl ArrayGeometry {
    pub fn new(name: impl Into<String>, mic_positions: Vec<Vec3>) -> Result<Self> {
        if mic_positions.len() < 2 {
            return Err(Error::invalid("an array needs at least two microphones"));
        }
        for (i, a) in mic_positions.iter().enumerate() {
            if !a.iter().all(|x| x.is_finite()) {
                return Err(Error::invalid(format!(
                    "microphone {i} has non-finite position"
                )));
            }
            for (j, b) in mic_positions.iter().enumerate().skip(i + 1) {
                if (a - b).norm() <= COINCIDENT_TOL {
                    return Err(Error::DegenerateGeometry(format!(
                        "microphones {i} and {j} coincide"
                    )));
                }
            }
        }
        Ok(Self {
            name: name.into(),
            mic_positions: mic_positions.iter().map(|p| [p.x, p.y, p.z]).collect(),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn mic_count(&self) -> usize {
        self.mic_positions.len()
    }

    pub fn mic(&self, index: usize) -> Vec3 {
        Vec3::from(self.mic_positions[index])
    }

    pub fn mic_positions(&self) -> Vec<Vec3> {
        self.mic_positions.iter().map(|p| Vec3::from(*p)).collect()
    }

    pub fn centroid(&self) -> Vec3 {
        self.mic_positions().iter().sum::<Vec3>() / self.mic_count() as f64
    }

    /// Largest inter-microphone distance, meters.
    pub fn aperture(&self) -> f64 {
        let mics = self.mic_positions();
        let mut best = 0.0f64;
        for (i, a) in mics.iter().enumerate() {
            for b in &mics[i + 1..] {
                best = best.max((a - b).norm());
            }
        }
        best
    }

    /// All microphones on one line (front/back ambiguous for azimuth).
    pub fn is_collinear(&self) -> bool {
        let mics = self.mic_positions();
        let (a, far) = mics.iter().skip(1).map(|m| (m, (m - mics[0]).norm())).fold(
            (mics[1], 0.0),
            |acc, (m, d)| if d > acc.1 { (*m, d) } else { acc },
        );
        let axis = (a - mics[0]) / far;
        mics.iter().all(|m| {
            let d = m - mics[0];
            (d - axis * d.dot(&axis)).norm() < 1e-9
        })
    }

    /// True if microphones sample a sphere evenly enough for first-order
    /// spherical-harmonic projection: at least 12 mics, equal radius within
    /// 5%, and first-order harmonics close to orthogonal under the sampling.
    pub fn is_spherical(&self) -> bool {
        if self.mic_count() < 12 {
            return false;
        }
        let c = self.centroid();
        let radii: Vec<f64> = self
            .mic_positions()
            .iter()
            .map(|m| (m - c).norm())
            .collect();
        let mean_r = radii.iter().sum::<f64>() / radii.len() as f64;
        if mean_r <= 0.0 || radii.iter().any(|r| (r - mean_r).abs() > 0.05 * mean_r) {
            return false;
        }
        let mut gram = Mat3::zeros();
        let mut first = Vec3::zeros();
        for m in self.mic_positions() {
            let u = (m - c).normalize();
            gram += u * u.transpose();
            first += u;
        }
        let n = self.mic_count() as f64;
        let gram_err = (gram * (3.0 / n) - Mat3::identity()).abs().max();
        gram_err < 0.1 && first.norm() / n < 0.1
    }

    /// Looks up a preset by name (`robot-head`, `eigenmike`, `dicit`,
    /// `dicit-32cm` and the other nested spacings, `hearing-aids`).
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "robot-head" | "robot_head" => Ok(Self::robot_head()),
            "eigenmike" => Ok(Self::eigenmike()),
            "dicit" => Ok(Self::dicit()),
            "dicit-4cm" => Self::dicit_subarray(0.04),
            "dicit-8cm" => Self::dicit_subarray(0.08),
            "dicit-16cm" => Self::dicit_subarray(0.16),
            "dicit-32cm" => Self::dicit_subarray(0.32),
            "hearing-aids" | "hearing_aids" => Ok(Self::hearing_aids()),
            other => Err(Error::invalid(format!("unknown array preset '{other}'"))),
        }
    }

    pub const PRESET_NAMES: [&'static str; 8] = [
        "robot-head",
        "eigenmike",
        "dicit",
        "dicit-4cm",
        "dicit-8cm",
        "dicit-16cm",
        "dicit-32cm",
        "hearing-aids",
    ];

    /// 12-microphone pseudo-spherical head array. Without corpus coordinates
    /// this is an icosahedral layout of radius 5 cm.
    pub fn robot_head() -> Self {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let mut mics = Vec::with_capacity(12);
        for &a in &[-1.0, 1.0] {
            for &b in &[-phi, phi] {
                mics.push(Vec3::new(0.0, a, b));
                mics.push(Vec3::new(a, b, 0.0));
                mics.push(Vec3::new(b, 0.0, a));
            }
        }
        let mics = mics.into_iter().map(|m| m.normalize() * 0.05).collect();
        Self::new("robot-head", mics).expect("static preset is valid")
    }

    /// 32-capsule spherical array, radius 42 mm, capsule directions from the
    /// vendor layout (colatitude, azimuth in degrees).
    pub fn eigenmike() -> Self {
        const LAYOUT: [(f64, f64); 32] = [
            (69.0, 0.0),
            (90.0, 32.0),
            (111.0, 0.0),
            (90.0, 328.0),
            (32.0, 0.0),
            (55.0, 45.0),
            (90.0, 69.0),
            (125.0, 45.0),
            (148.0, 0.0),
            (125.0, 315.0),
            (90.0, 291.0),
            (55.0, 315.0),
            (21.0, 91.0),
            (58.0, 90.0),
            (121.0, 90.0),
            (159.0, 89.0),
            (69.0, 180.0),
            (90.0, 212.0),
            (111.0, 180.0),
            (90.0, 148.0),
            (32.0, 180.0),
            (55.0, 225.0),
            (90.0, 249.0),
            (125.0, 225.0),
            (148.0, 180.0),
            (125.0, 135.0),
            (90.0, 111.0),
            (55.0, 135.0),
            (21.0, 269.0),
            (58.0, 270.0),
            (122.0, 270.0),
            (159.0, 271.0),
        ];
        let mics = LAYOUT
            .iter()
            .map(|&(col, az)| Doa::new(az.to_radians(), col.to_radians()).to_unit_vector() * 0.042)
            .collect();
        Self::new("eigenmike", mics).expect("static preset is valid")
    }

    /// x-coordinates (cm) of the 15-microphone nested linear array: uniform
    /// sub-arrays at 4, 8, 16 and 32 cm spacing sharing the centre, total
    /// aperture 2.24 m.
    const DICIT_X_CM: [i32; 15] = [
        -112, -80, -48, -32, -16, -8, -4, 0, 4, 8, 16, 32, 48, 80, 112,
    ];

    fn dicit_members(spacing_cm: i32) -> Vec<i32> {
        match spacing_cm {
            4 => vec![-8, -4, 0, 4, 8],
            8 => vec![-16, -8, 0, 8, 16],
            16 => vec![-48, -32, -16, 0, 16, 32, 48],
            32 => vec![-112, -80, -48, -16, 16, 48, 80, 112],
            _ => vec![],
        }
    }

    /// Full 15-microphone nested linear array along local x.
    pub fn dicit() -> Self {
        let mics = Self::DICIT_X_CM
            .iter()
            .map(|&x| Vec3::new(x as f64 / 100.0, 0.0, 0.0))
            .collect();
        Self::new("dicit", mics).expect("static preset is valid")
    }

    /// The uniform sub-array of the nested linear array with the given
    /// spacing (0.04, 0.08, 0.16 or 0.32 m).
    pub fn dicit_subarray(spacing_m: f64) -> Result<Self> {
        let cm = (spacing_m * 100.0).round() as i32;
        let members = Self::dicit_members(cm);
        if members.is_empty() || ((spacing_m * 100.0) - cm as f64).abs() > 1e-6 {
            return Err(Error::invalid(format!(
                "no nested sub-array with spacing {spacing_m} m"
            )));
        }
        let mics = members
            .iter()
            .map(|&x| Vec3::new(x as f64 / 100.0, 0.0, 0.0))
            .collect();
        Self::new(format!("dicit-{cm}cm"), mics)
    }

    /// Two behind-the-ear devices, 157 mm apart along local y, each with two
    /// microphones 9 mm apart along the look direction (+x).
    pub fn hearing_aids() -> Self {
        let half_sep = 0.157 / 2.0;
        let half_pair = 0.009 / 2.0;
        let mics = vec![
            Vec3::new(half_pair, half_sep, 0.0),
            Vec3::new(-half_pair, half_sep, 0.0),
            Vec3::new(half_pair, -half_sep, 0.0),
            Vec3::new(-half_pair, -half_sep, 0.0),
        ];
        Self::new("hearing-aids", mics).expect("static preset is valid")
    }
}

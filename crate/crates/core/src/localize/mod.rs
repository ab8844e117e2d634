//! Frame-level direction-of-arrival estimation.
//!
//! All localizers work in the array's local frame on blocks of
//! [`SpectralFrame`](crate::sigproc::SpectralFrame)s. Far-field steering uses
//! delays relative to the array centroid.

mod intensity;
mod music;
mod srp;
mod tdoa;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::geometry::{wrap, ArrayGeometry, Doa};
use crate::sigproc::C64;
use crate::{Error, Result};

pub use intensity::{block_direction, intensity_vectors, pseudo_intensity, IntensityConfig};
pub use music::{music_spectrum, MusicConfig, MusicPlan};
pub use srp::{srp_phat, SrpConfig, SrpPlan};
pub use tdoa::{
    expected_tdoa, far_field_tdoa, gcc_phat, max_physical_lag, tdoa_fit, tdoa_to_azimuth,
    TdoaEstimate,
};

/// Default analysis band for the broadband localizers.
pub const DEFAULT_BAND_HZ: (f64, f64) = (300.0, 4000.0);

/// Relative floor below which PHAT weights are zeroed.
pub const PHAT_FLOOR: f64 = 1e-12;

/// Candidate directions for grid-search localizers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoaGrid {
    directions: Vec<Doa>,
    resolution_deg: f64,
}

impl DoaGrid {
    pub fn new(directions: Vec<Doa>, resolution_deg: f64) -> Result<Self> {
        if directions.is_empty() {
            return Err(Error::invalid("grid needs at least one direction"));
        }
        if !(resolution_deg > 0.0) {
            return Err(Error::invalid("grid resolution must be > 0"));
        }
        Ok(Self {
            directions,
            resolution_deg,
        })
    }

    /// Horizontal ring starting at azimuth 0 with the given spacing.
    pub fn azimuth_ring(resolution_deg: f64) -> Result<Self> {
        if !(resolution_deg > 0.0 && resolution_deg <= 180.0) {
            return Err(Error::invalid(format!(
                "ring resolution {resolution_deg}° out of (0, 180]"
            )));
        }
        let n = (360.0 / resolution_deg).round().max(2.0) as usize;
        let step = 2.0 * PI / n as f64;
        let directions = (0..n)
            .map(|i| Doa::horizontal(wrap(i as f64 * step)))
            .collect();
        Self::new(directions, 360.0 / n as f64)
    }

    /// Horizontal directions over `[0, π]`, both ends included. A collinear
    /// array along local x cannot tell `φ` from `−φ`, so this half covers it.
    pub fn half_ring(resolution_deg: f64) -> Result<Self> {
        if !(resolution_deg > 0.0 && resolution_deg <= 90.0) {
            return Err(Error::invalid(format!(
                "ring resolution {resolution_deg}° out of (0, 90]"
            )));
        }
        let n = (180.0 / resolution_deg).round().max(1.0) as usize;
        let step = PI / n as f64;
        let directions = (0..n)
            .map(|i| Doa::horizontal(i as f64 * step))
            .chain([Doa::horizontal(-PI)])
            .collect();
        Self::new(directions, 180.0 / n as f64)
    }

    /// Near-uniform full-sphere grid (Fibonacci lattice) whose mean spacing
    /// matches `resolution_deg`.
    pub fn sphere(resolution_deg: f64) -> Result<Self> {
        if !(resolution_deg > 0.0 && resolution_deg <= 90.0) {
            return Err(Error::invalid(format!(
                "sphere resolution {resolution_deg}° out of (0, 90]"
            )));
        }
        let delta = resolution_deg.to_radians();
        let n = (4.0 * PI / (delta * delta)).ceil() as usize;
        let golden = PI * (3.0 - 5f64.sqrt());
        let directions = (0..n)
            .map(|i| {
                let z = 1.0 - (2 * i + 1) as f64 / n as f64;
                Doa::new(wrap(i as f64 * golden), z.acos())
            })
            .collect();
        Self::new(directions, resolution_deg)
    }

    /// 2° sphere for spherical arrays, 1° azimuth ring otherwise.
    pub fn default_for(geometry: &ArrayGeometry) -> Self {
        if geometry.is_spherical() {
            Self::sphere(2.0).expect("valid resolution")
        } else if geometry.is_collinear() {
            Self::half_ring(1.0).expect("valid resolution")
        } else {
            Self::azimuth_ring(1.0).expect("valid resolution")
        }
    }

    pub fn directions(&self) -> &[Doa] {
        &self.directions
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn resolution_deg(&self) -> f64 {
        self.resolution_deg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpectrumKind {
    Srp,
    Music,
    PivHistogram,
}

/// One real score per grid direction.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialSpectrum {
    grid: DoaGrid,
    values: Vec<f64>,
    kind: SpectrumKind,
}

impl SpatialSpectrum {
    pub fn new(grid: DoaGrid, values: Vec<f64>, kind: SpectrumKind) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "{} values for a grid of {}",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite spectrum value at index {i}"
            )));
        }
        Ok(Self { grid, values, kind })
    }

    pub fn grid(&self) -> &DoaGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> SpectrumKind {
        self.kind
    }

    /// Index of the first maximum.
    pub fn argmax_index(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        best
    }

    /// Up to `count` strongest directions, each at least `min_separation`
    /// radians from every direction already picked. Ties go to the lower index.
    pub fn peaks(&self, count: usize, min_separation: f64) -> Vec<(Doa, f64)> {
        let mut order: Vec<usize> = (0..self.values.len()).collect();
        order.sort_by(|&a, &b| self.values[b].total_cmp(&self.values[a]).then(a.cmp(&b)));
        let dirs = self.grid.directions();
        let mut picked: Vec<(Doa, f64)> = Vec::with_capacity(count);
        for i in order {
            if picked.len() == count {
                break;
            }
            if picked
                .iter()
                .all(|(d, _)| d.angle_to(&dirs[i]) >= min_separation)
            {
                picked.push((dirs[i], self.values[i]));
            }
        }
        picked
    }
}

/// Direction of the maximum; ties go to the smallest grid index.
pub fn srp_argmax(spectrum: &SpatialSpectrum) -> Doa {
    spectrum.grid.directions[spectrum.argmax_index()]
}

/// A labelled direction estimate at one timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoaEstimate {
    pub timestamp: f64,
    pub doa: Doa,
    pub source_id: u32,
    pub score: f64,
}

/// `G/|G|`, with weight 0 wherever `|G| < PHAT_FLOOR·max|G|`.
pub(crate) fn phat(values: &[C64]) -> Result<Vec<C64>> {
    let peak = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::NoSignal("all-zero cross spectrum".into()));
    }
    let floor = PHAT_FLOOR * peak;
    Ok(values
        .iter()
        .map(|v| {
            let n = v.norm();
            if n < floor {
                C64::new(0.0, 0.0)
            } else {
                v / n
            }
        })
        .collect())
}

pub(crate) fn check_block(
    frames: &[crate::sigproc::SpectralFrame],
    geometry: &ArrayGeometry,
) -> Result<()> {
    let first = frames
        .first()
        .ok_or_else(|| Error::invalid("empty frame block"))?;
    if first.channel_count() != geometry.mic_count() {
        return Err(Error::invalid(format!(
            "block has {} channels, geometry '{}' has {} mics",
            first.channel_count(),
            geometry.name(),
            geometry.mic_count()
        )));
    }
    if frames.iter().any(|f| {
        f.window_length() != first.window_length() || f.sample_rate_hz() != first.sample_rate_hz()
    }) {
        return Err(Error::invalid(
            "frames in a block must share window length and sample rate",
        ));
    }
    Ok(())
}

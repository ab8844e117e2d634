//! First-order pseudo-intensity for spherical arrays.
//!
//! Eigenbeams are free-field projections onto order-0 and order-1 real
//! spherical harmonics: `P₀ = (1/M)Σ s_m` and `P_xyz = (3/M)Σ u_m s_m`, with
//! `u_m` the unit direction of microphone `m` from the centroid. For a plane
//! wave the order-1 beams carry an extra factor `j` relative to `P₀`, so the
//! particle-velocity proxy is `j·P_xyz` and
//! `I = Σ_bins Re{P₀*·j·P_xyz}` points along the propagation direction.
//! The direction of arrival is therefore `−I`.
//!
//! No rigid-baffle mode-strength compensation is applied. Bins above
//! `kr = 0.9π` are excluded because the monopole response changes sign near
//! `kr = π`.

use super::{check_block, DoaEstimate, DEFAULT_BAND_HZ};
use crate::geometry::{ArrayGeometry, Doa, Vec3, SPEED_OF_SOUND};
use crate::sigproc::{band_bins, SpectralFrame, C64};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensityConfig {
    pub band_hz: (f64, f64),
    pub speed_of_sound: f64,
}

impl Default for IntensityConfig {
    fn default() -> Self {
        Self {
            band_hz: DEFAULT_BAND_HZ,
            speed_of_sound: SPEED_OF_SOUND,
        }
    }
}

/// Propagation-direction intensity per frame; `None` where it vanishes.
pub fn intensity_vectors(
    frames: &[SpectralFrame],
    geometry: &ArrayGeometry,
    config: IntensityConfig,
) -> Result<Vec<Option<Vec3>>> {
    if !geometry.is_spherical() {
        return Err(Error::UnsupportedGeometry(format!(
            "pseudo-intensity needs a spherical layout, '{}' is not",
            geometry.name()
        )));
    }
    check_block(frames, geometry)?;
    let c = geometry.centroid();
    let dirs: Vec<Vec3> = geometry
        .mic_positions()
        .iter()
        .map(|x| (x - c).normalize())
        .collect();
    let radius = geometry
        .mic_positions()
        .iter()
        .map(|x| (x - c).norm())
        .sum::<f64>()
        / dirs.len() as f64;
    let m = dirs.len() as f64;
    let fs = frames[0].sample_rate_hz();
    let n = frames[0].window_length();
    let top = config
        .band_hz
        .1
        .min(0.9 * config.speed_of_sound / (2.0 * radius));
    let band = band_bins(config.band_hz.0, top, n, fs);
    if band.is_empty() {
        return Err(Error::invalid("analysis band contains no bins"));
    }
    let j = C64::new(0.0, 1.0);

    Ok(frames
        .iter()
        .map(|f| {
            let mut acc = Vec3::zeros();
            for k in band.clone() {
                let mut p0 = C64::new(0.0, 0.0);
                let mut p1 = [C64::new(0.0, 0.0); 3];
                for (i, u) in dirs.iter().enumerate() {
                    let s = f.channel(i)[k];
                    p0 += s;
                    for a in 0..3 {
                        p1[a] += s * u[a];
                    }
                }
                p0 /= m;
                for a in 0..3 {
                    acc[a] += (p0.conj() * j * p1[a] * (3.0 / m)).re;
                }
            }
            let norm = acc.norm();
            (norm > 0.0 && norm.is_finite()).then_some(acc)
        })
        .collect())
}

/// One estimate per frame with nonvanishing intensity, labelled source 1.
/// `score` is the intensity magnitude.
pub fn pseudo_intensity(
    frames: &[SpectralFrame],
    geometry: &ArrayGeometry,
    config: IntensityConfig,
) -> Result<Vec<DoaEstimate>> {
    let vectors = intensity_vectors(frames, geometry, config)?;
    let out: Vec<DoaEstimate> = frames
        .iter()
        .zip(vectors)
        .filter_map(|(f, v)| {
            let v = v?;
            Some(DoaEstimate {
                timestamp: f.frame_center_time(),
                doa: Doa::from_vector(&-v).ok()?,
                source_id: 1,
                score: v.norm(),
            })
        })
        .collect();
    if out.is_empty() {
        return Err(Error::NoSignal("no frame carried intensity".into()));
    }
    Ok(out)
}

/// Direction of the summed intensity over several frames.
pub fn block_direction(vectors: &[Option<Vec3>]) -> Option<Doa> {
    let sum: Vec3 = vectors.iter().flatten().sum();
    Doa::from_vector(&-sum).ok()
}

//! Broadband MUSIC.
//!
//! Each bin's correlation matrix is the block average of snapshot outer
//! products plus diagonal loading. Narrowband pseudo-spectra
//! `1/(‖v‖² − ‖U_sᴴv‖²)` are normalized by their own maximum over the grid
//! and averaged across the band.

use nalgebra::{DMatrix, SymmetricEigen};

use super::{check_block, DoaGrid, SpatialSpectrum, SpectrumKind, DEFAULT_BAND_HZ};
use crate::geometry::{ArrayGeometry, SPEED_OF_SOUND};
use crate::sigproc::{band_bins, bin_omega, SpectralFrame, C64};
use crate::{Error, Result};

/// Condition number above which a loaded correlation matrix is rejected.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MusicConfig {
    pub band_hz: (f64, f64),
    pub speed_of_sound: f64,
    /// Diagonal loading as a fraction of `trace/M`.
    pub loading: f64,
}

impl Default for MusicConfig {
    fn default() -> Self {
        Self {
            band_hz: DEFAULT_BAND_HZ,
            speed_of_sound: SPEED_OF_SOUND,
            loading: 1e-6,
        }
    }
}

/// Per-direction microphone delays for one geometry and grid.
#[derive(Debug, Clone)]
pub struct MusicPlan {
    geometry: ArrayGeometry,
    grid: DoaGrid,
    sample_rate_hz: f64,
    config: MusicConfig,
    /// `leads[d·M + m]`: arrival lead of mic `m` over the centroid, samples.
    leads: Vec<f64>,
}

impl MusicPlan {
    pub fn new(
        geometry: &ArrayGeometry,
        grid: &DoaGrid,
        sample_rate_hz: f64,
        config: MusicConfig,
    ) -> Result<Self> {
        if !(config.band_hz.0 < config.band_hz.1) {
            return Err(Error::invalid("band must satisfy low < high"));
        }
        if !(config.loading >= 0.0) {
            return Err(Error::invalid("loading must be ≥ 0"));
        }
        let c = geometry.centroid();
        let rel: Vec<_> = geometry
            .mic_positions()
            .iter()
            .map(|x| (x - c) * (sample_rate_hz / config.speed_of_sound))
            .collect();
        let mut leads = Vec::with_capacity(grid.len() * rel.len());
        for d in grid.directions() {
            let u = d.to_unit_vector();
            leads.extend(rel.iter().map(|r| u.dot(r)));
        }
        Ok(Self {
            geometry: geometry.clone(),
            grid: grid.clone(),
            sample_rate_hz,
            config,
            leads,
        })
    }

    pub fn grid(&self) -> &DoaGrid {
        &self.grid
    }

    pub fn spectrum(&self, frames: &[SpectralFrame], n_sources: usize) -> Result<SpatialSpectrum> {
        check_block(frames, &self.geometry)?;
        let m = self.geometry.mic_count();
        if n_sources == 0 || n_sources >= m {
            return Err(Error::invalid(format!(
                "n_sources {n_sources} must lie in [1, {m})"
            )));
        }
        if frames.len() < m {
            return Err(Error::invalid(format!(
                "{} frames cannot give a full-rank estimate for {m} channels",
                frames.len()
            )));
        }
        let fs = frames[0].sample_rate_hz();
        if (fs - self.sample_rate_hz).abs() > 1e-9 * fs {
            return Err(Error::invalid("block sample rate differs from the plan"));
        }
        let n = frames[0].window_length();
        let band: Vec<usize> =
            band_bins(self.config.band_hz.0, self.config.band_hz.1, n, fs).collect();
        if band.is_empty() {
            return Err(Error::invalid("analysis band contains no bins"));
        }

        // signal subspaces, conjugated: subspaces[b][s·M + m] = conj(U_s[m])
        let mut subspaces = Vec::with_capacity(band.len());
        for &k in &band {
            subspaces.push(self.signal_subspace(frames, k, n_sources)?);
        }

        let nb = band.len();
        let dirs = self.grid.len();
        let mut narrow = vec![0.0; dirs * nb];
        let mut v = vec![C64::new(0.0, 0.0); m];
        let mut step = vec![C64::new(0.0, 0.0); m];
        let w0 = bin_omega(band[0], n);
        let dw = bin_omega(1, n);
        for d in 0..dirs {
            let leads = &self.leads[d * m..(d + 1) * m];
            for i in 0..m {
                v[i] = C64::from_polar(1.0, w0 * leads[i]);
                step[i] = C64::from_polar(1.0, dw * leads[i]);
            }
            for (b, us) in subspaces.iter().enumerate() {
                let mut proj = 0.0;
                for u in us.chunks_exact(m) {
                    let dot: C64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
                    proj += dot.norm_sqr();
                }
                narrow[d * nb + b] = 1.0 / (m as f64 - proj).max(1e-12 * m as f64);
                for (x, s) in v.iter_mut().zip(&step) {
                    *x *= s;
                }
            }
        }

        let mut peak = vec![0.0f64; nb];
        for row in narrow.chunks_exact(nb) {
            for (p, &x) in peak.iter_mut().zip(row) {
                *p = p.max(x);
            }
        }
        let values = narrow
            .chunks_exact(nb)
            .map(|row| row.iter().zip(&peak).map(|(x, p)| x / p).sum::<f64>() / nb as f64)
            .collect();
        SpatialSpectrum::new(self.grid.clone(), values, SpectrumKind::Music)
    }

    fn signal_subspace(
        &self,
        frames: &[SpectralFrame],
        k: usize,
        n_sources: usize,
    ) -> Result<Vec<C64>> {
        let m = self.geometry.mic_count();
        let mut r = DMatrix::<C64>::zeros(m, m);
        for f in frames {
            let s: Vec<C64> = (0..m).map(|c| f.channel(c)[k]).collect();
            for i in 0..m {
                for j in 0..m {
                    r[(i, j)] += s[i] * s[j].conj();
                }
            }
        }
        r /= C64::new(frames.len() as f64, 0.0);
        let trace: f64 = (0..m).map(|i| r[(i, i)].re).sum();
        if !(trace > 0.0) {
            return Err(Error::IllConditioned(f64::INFINITY));
        }
        let load = self.config.loading * trace / m as f64;
        for i in 0..m {
            r[(i, i)] += load;
        }
        let eig = SymmetricEigen::new(r);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let (hi, lo) = (eig.eigenvalues[order[0]], eig.eigenvalues[order[m - 1]]);
        let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if !(cond <= MAX_CONDITION) {
            return Err(Error::IllConditioned(cond));
        }
        let mut out = Vec::with_capacity(n_sources * m);
        for &col in &order[..n_sources] {
            out.extend(eig.eigenvectors.column(col).iter().map(|x| x.conj()));
        }
        Ok(out)
    }
}

/// One-shot broadband MUSIC over `grid`.
pub fn music_spectrum(
    frames: &[SpectralFrame],
    geometry: &ArrayGeometry,
    grid: &DoaGrid,
    n_sources: usize,
    config: MusicConfig,
) -> Result<SpatialSpectrum> {
    let fs = frames
        .first()
        .ok_or_else(|| Error::invalid("empty frame block"))?
        .sample_rate_hz();
    MusicPlan::new(geometry, grid, fs, config)?.spectrum(frames, n_sources)
}

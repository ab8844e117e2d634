//! Steered response power with phase transform.
//!
//! `P(u) = Σ_m Σ_ℓ (1/B) Σ_k Re{Ĝ_{m,ℓ}(k)·e^{jω_k τ_{m,ℓ}(u)}}` over the `B`
//! bins of the analysis band, `Ĝ` the PHAT-whitened block cross spectrum.
//! The diagonal terms add a direction-independent offset. Each off-diagonal
//! pair is tabulated exactly on a lattice of lags spaced `1/interpolation`
//! samples and read back with linear interpolation, so the cost per block is
//! dominated by the grid size times the pair count.

use super::{check_block, phat, DoaGrid, SpatialSpectrum, SpectrumKind, DEFAULT_BAND_HZ};
use crate::geometry::{ArrayGeometry, SPEED_OF_SOUND};
use crate::sigproc::{band_bins, bin_omega, cross_power_spectrum, SpectralFrame, C64};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SrpConfig {
    pub band_hz: (f64, f64),
    pub speed_of_sound: f64,
    /// Lag-table nodes per sample.
    pub interpolation: usize,
}

impl Default for SrpConfig {
    fn default() -> Self {
        Self {
            band_hz: DEFAULT_BAND_HZ,
            speed_of_sound: SPEED_OF_SOUND,
            interpolation: 8,
        }
    }
}

/// Precomputed steering lags for one geometry, grid and sample rate.
#[derive(Debug, Clone)]
pub struct SrpPlan {
    geometry: ArrayGeometry,
    grid: DoaGrid,
    sample_rate_hz: f64,
    config: SrpConfig,
    pairs: Vec<(usize, usize)>,
    /// Half-width of each pair's lag table, in lattice nodes.
    half_spans: Vec<usize>,
    offsets: Vec<usize>,
    /// `positions[d·P + p]`: lattice coordinate of pair `p` steered to direction `d`.
    positions: Vec<f64>,
}

impl SrpPlan {
    pub fn new(
        geometry: &ArrayGeometry,
        grid: &DoaGrid,
        sample_rate_hz: f64,
        config: SrpConfig,
    ) -> Result<Self> {
        if config.interpolation == 0 {
            return Err(Error::invalid("interpolation must be ≥ 1"));
        }
        if !(config.band_hz.0 < config.band_hz.1) {
            return Err(Error::invalid("band must satisfy low < high"));
        }
        if grid.is_empty() {
            return Err(Error::invalid("empty grid"));
        }
        let m = geometry.mic_count();
        let scale = sample_rate_hz / config.speed_of_sound * config.interpolation as f64;
        let mut pairs = Vec::new();
        let mut baselines = Vec::new();
        let mut half_spans = Vec::new();
        let mut offsets = Vec::new();
        let mut total = 0;
        for a in 0..m {
            for b in a + 1..m {
                let base = (geometry.mic(b) - geometry.mic(a)) * scale;
                let half = base.norm().ceil() as usize + 1;
                pairs.push((a, b));
                baselines.push(base);
                half_spans.push(half);
                offsets.push(total);
                total += 2 * half + 1;
            }
        }
        let mut positions = Vec::with_capacity(grid.len() * pairs.len());
        for d in grid.directions() {
            let u = d.to_unit_vector();
            positions.extend(baselines.iter().map(|b| u.dot(b)));
        }
        Ok(Self {
            geometry: geometry.clone(),
            grid: grid.clone(),
            sample_rate_hz,
            config,
            pairs,
            half_spans,
            offsets,
            positions,
        })
    }

    pub fn grid(&self) -> &DoaGrid {
        &self.grid
    }

    pub fn spectrum(&self, frames: &[SpectralFrame]) -> Result<SpatialSpectrum> {
        self.evaluate(frames, true)
    }

    fn evaluate(&self, frames: &[SpectralFrame], cross_terms: bool) -> Result<SpatialSpectrum> {
        check_block(frames, &self.geometry)?;
        let fs = frames[0].sample_rate_hz();
        if (fs - self.sample_rate_hz).abs() > 1e-9 * fs {
            return Err(Error::invalid(format!(
                "plan built for {} Hz, block is {fs} Hz",
                self.sample_rate_hz
            )));
        }
        let n = frames[0].window_length();
        let band: Vec<usize> =
            band_bins(self.config.band_hz.0, self.config.band_hz.1, n, fs).collect();
        if band.is_empty() {
            return Err(Error::invalid("analysis band contains no bins"));
        }
        let inv_b = 1.0 / band.len() as f64;

        let mut diagonal = 0.0;
        for m in 0..self.geometry.mic_count() {
            let w = phat(cross_power_spectrum(frames, (m, m), frames.len())?.values())?;
            diagonal += band.iter().filter(|&&k| w[k].re > 0.0).count() as f64 * inv_b;
        }
        let mut values = vec![diagonal; self.grid.len()];
        if !cross_terms {
            return SpatialSpectrum::new(self.grid.clone(), values, SpectrumKind::Srp);
        }

        let lattice = 1.0 / self.config.interpolation as f64;
        let mut table = vec![
            0.0;
            self.offsets
                .last()
                .map_or(0, |o| o + 2 * self.half_spans.last().unwrap() + 1)
        ];
        for (p, &pair) in self.pairs.iter().enumerate() {
            let w = phat(cross_power_spectrum(frames, pair, frames.len())?.values())?;
            let half = self.half_spans[p];
            let slots = &mut table[self.offsets[p]..self.offsets[p] + 2 * half + 1];
            for &k in &band {
                let omega = bin_omega(k, n);
                let step = C64::from_polar(1.0, omega * lattice);
                let mut phasor = w[k] * C64::from_polar(1.0, -omega * lattice * half as f64);
                for slot in slots.iter_mut() {
                    *slot += phasor.re;
                    phasor *= step;
                }
            }
            slots.iter_mut().for_each(|s| *s *= inv_b);
        }

        let np = self.pairs.len();
        for (d, value) in values.iter_mut().enumerate() {
            let mut cross = 0.0;
            for p in 0..np {
                let half = self.half_spans[p];
                let x = self.positions[d * np + p] + half as f64;
                let i = (x.floor() as usize).min(2 * half - 1);
                let frac = x - i as f64;
                let t = &table[self.offsets[p] + i..];
                cross += t[0] + (t[1] - t[0]) * frac;
            }
            *value += 2.0 * cross;
        }
        SpatialSpectrum::new(self.grid.clone(), values, SpectrumKind::Srp)
    }
}

/// One-shot SRP-PHAT over `grid`. Reuse an [`SrpPlan`] when processing many blocks.
pub fn srp_phat(
    frames: &[SpectralFrame],
    geometry: &ArrayGeometry,
    grid: &DoaGrid,
    config: SrpConfig,
) -> Result<SpatialSpectrum> {
    let fs = frames
        .first()
        .ok_or_else(|| Error::invalid("empty frame block"))?
        .sample_rate_hz();
    SrpPlan::new(geometry, grid, fs, config)?.spectrum(frames)
}

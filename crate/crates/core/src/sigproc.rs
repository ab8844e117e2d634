//! Multichannel buffers, STFT framing and cross-power spectra.

use std::f64::consts::PI;
use std::str::FromStr;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type C64 = Complex<f64>;

/// Default recording sample rate.
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 48_000.0;
pub const DEFAULT_WINDOW_LENGTH: usize = 2048;
pub const DEFAULT_HOP: usize = 1024;
pub const DEFAULT_AVERAGING_FRAMES: usize = 8;

/// Channel-major audio samples.
#[derive(Debug, Clone, PartialEq)]
pub struct MultichannelAudio {
    channels: Vec<Vec<f64>>,
    sample_rate_hz: f64,
    start_time: f64,
}

impl MultichannelAudio {
    pub fn new(channels: Vec<Vec<f64>>, sample_rate_hz: f64, start_time: f64) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::invalid("audio needs at least one channel"));
        }
        if !(sample_rate_hz > 0.0) || !sample_rate_hz.is_finite() {
            return Err(Error::invalid(format!(
                "sample rate {sample_rate_hz} must be > 0"
            )));
        }
        let len = channels[0].len();
        if let Some(i) = channels.iter().position(|c| c.len() != len) {
            return Err(Error::invalid(format!(
                "channel {i} has {} samples, channel 0 has {len}",
                channels[i].len()
            )));
        }
        Ok(Self {
            channels,
            sample_rate_hz,
            start_time,
        })
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn channel(&self, index: usize) -> &[f64] {
        &self.channels[index]
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    /// Samples per channel.
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn start_time(&self) -> f64 {
        self.start_time
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 / self.sample_rate_hz
    }

    /// Keeps only the listed channels, in the given order.
    pub fn select_channels(&self, indices: &[usize]) -> Result<Self> {
        let mut channels = Vec::with_capacity(indices.len());
        for &i in indices {
            let c = self
                .channels
                .get(i)
                .ok_or_else(|| Error::invalid(format!("channel {i} out of range")))?;
            channels.push(c.clone());
        }
        Self::new(channels, self.sample_rate_hz, self.start_time)
    }

    pub fn into_channels(self) -> Vec<Vec<f64>> {
        self.channels
    }
}

/// Analysis taper.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Window {
    Rectangular,
    #[default]
    Hann,
}

impl Window {
    /// Periodic taper of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
        }
    }
}

impl FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rect" | "rectangular" | "boxcar" => Ok(Window::Rectangular),
            "hann" | "hanning" => Ok(Window::Hann),
            other => Err(Error::invalid(format!("unknown window '{other}'"))),
        }
    }
}

/// One-sided spectra of all channels for one analysis frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFrame {
    bins: Vec<Vec<C64>>,
    frame_center_time: f64,
    window_length: usize,
    hop: usize,
    sample_rate_hz: f64,
}

impl SpectralFrame {
    pub fn new(
        bins: Vec<Vec<C64>>,
        frame_center_time: f64,
        window_length: usize,
        hop: usize,
        sample_rate_hz: f64,
    ) -> Result<Self> {
        let expected = window_length / 2 + 1;
        if bins.iter().any(|c| c.len() != expected) {
            return Err(Error::invalid(format!(
                "each channel needs {expected} bins for window {window_length}"
            )));
        }
        if !(sample_rate_hz > 0.0) {
            return Err(Error::invalid("sample rate must be > 0"));
        }
        Ok(Self {
            bins,
            frame_center_time,
            window_length,
            hop,
            sample_rate_hz,
        })
    }

    pub fn channel(&self, index: usize) -> &[C64] {
        &self.bins[index]
    }

    pub fn channel_count(&self) -> usize {
        self.bins.len()
    }

    pub fn bin_count(&self) -> usize {
        self.window_length / 2 + 1
    }

    pub fn frame_center_time(&self) -> f64 {
        self.frame_center_time
    }

    pub fn window_length(&self) -> usize {
        self.window_length
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }
}

/// Angular frequency of bin `k` in rad/sample.
pub fn bin_omega(k: usize, window_length: usize) -> f64 {
    2.0 * PI * k as f64 / window_length as f64
}

/// Frequency of bin `k` in Hz.
pub fn bin_frequency_hz(k: usize, window_length: usize, sample_rate_hz: f64) -> f64 {
    k as f64 * sample_rate_hz / window_length as f64
}

/// Inclusive bin range covering `[low_hz, high_hz]`, clipped to the spectrum.
pub fn band_bins(
    low_hz: f64,
    high_hz: f64,
    window_length: usize,
    sample_rate_hz: f64,
) -> std::ops::RangeInclusive<usize> {
    let df = sample_rate_hz / window_length as f64;
    let lo = (low_hz / df).ceil().max(0.0) as usize;
    let hi = ((high_hz / df).floor() as usize).min(window_length / 2);
    lo..=hi
}

/// Short-time Fourier analysis. Frame `k` covers samples
/// `[k·hop, k·hop + window_length)`; trailing partial frames are dropped.
pub fn frame_signal(
    audio: &MultichannelAudio,
    window_length: usize,
    hop: usize,
    window: Window,
) -> Result<Vec<SpectralFrame>> {
    if hop == 0 {
        return Err(Error::invalid("hop must be ≥ 1"));
    }
    if window_length == 0 {
        return Err(Error::invalid("window length must be ≥ 1"));
    }
    if window_length > audio.len() {
        return Ok(Vec::new());
    }
    let frame_count = (audio.len() - window_length) / hop + 1;
    let taper = window.coefficients(window_length);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(window_length);
    let fs = audio.sample_rate_hz();
    let half = window_length / 2 + 1;
    let mut buffer = vec![C64::new(0.0, 0.0); window_length];
    let mut scratch = vec![C64::new(0.0, 0.0); fft.get_inplace_scratch_len()];

    let mut frames = Vec::with_capacity(frame_count);
    for k in 0..frame_count {
        let start = k * hop;
        let mut bins = Vec::with_capacity(audio.channel_count());
        for channel in audio.channels() {
            for (b, (x, w)) in buffer
                .iter_mut()
                .zip(channel[start..start + window_length].iter().zip(&taper))
            {
                *b = C64::new(x * w, 0.0);
            }
            fft.process_with_scratch(&mut buffer, &mut scratch);
            bins.push(buffer[..half].to_vec());
        }
        let center = audio.start_time() + (start as f64 + window_length as f64 / 2.0) / fs;
        frames.push(SpectralFrame {
            bins,
            frame_center_time: center,
            window_length,
            hop,
            sample_rate_hz: fs,
        });
    }
    Ok(frames)
}

/// Block-averaged cross-power spectrum `G_{m,ℓ}(ω) = mean S_m(ω)·S_ℓ*(ω)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSpectrum {
    pair: (usize, usize),
    values: Vec<C64>,
    window_length: usize,
}

impl CrossSpectrum {
    pub fn new(pair: (usize, usize), values: Vec<C64>, window_length: usize) -> Result<Self> {
        if values.len() != window_length / 2 + 1 {
            return Err(Error::invalid(
                "cross spectrum length must be window_length/2 + 1",
            ));
        }
        Ok(Self {
            pair,
            values,
            window_length,
        })
    }

    pub fn pair(&self) -> (usize, usize) {
        self.pair
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn window_length(&self) -> usize {
        self.window_length
    }

    /// The spectrum of the swapped pair, `G_{ℓ,m} = conj(G_{m,ℓ})`.
    pub fn swapped(&self) -> Self {
        Self {
            pair: (self.pair.1, self.pair.0),
            values: self.values.iter().map(|v| v.conj()).collect(),
            window_length: self.window_length,
        }
    }
}

/// Averages `S_m·conj(S_ℓ)` over the last `averaging_frames` frames of the
/// block (or the whole block if it is shorter).
pub fn cross_power_spectrum(
    frames: &[SpectralFrame],
    pair: (usize, usize),
    averaging_frames: usize,
) -> Result<CrossSpectrum> {
    if averaging_frames == 0 {
        return Err(Error::invalid("averaging_frames must be ≥ 1"));
    }
    let first = frames
        .first()
        .ok_or_else(|| Error::invalid("empty frame block"))?;
    let channels = first.channel_count();
    if pair.0 >= channels || pair.1 >= channels {
        return Err(Error::invalid(format!(
            "pair ({}, {}) out of range for {channels} channels",
            pair.0, pair.1
        )));
    }
    let used = &frames[frames.len().saturating_sub(averaging_frames)..];
    let mut values = vec![C64::new(0.0, 0.0); first.bin_count()];
    for frame in used {
        for ((v, a), b) in values
            .iter_mut()
            .zip(frame.channel(pair.0))
            .zip(frame.channel(pair.1))
        {
            *v += a * b.conj();
        }
    }
    let scale = 1.0 / used.len() as f64;
    values.iter_mut().for_each(|v| *v *= scale);
    Ok(CrossSpectrum {
        pair,
        values,
        window_length: first.window_length,
    })
}

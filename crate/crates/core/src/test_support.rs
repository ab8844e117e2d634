//! Signal fixtures shared by unit tests.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;

use crate::geometry::{ArrayGeometry, Doa, SPEED_OF_SOUND};
use crate::sigproc::{MultichannelAudio, C64};

pub fn white(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Circular advance of `x` by `d` samples (Nyquist bin zeroed).
pub fn advance(x: &[f64], d: f64) -> Vec<f64> {
    let n = x.len();
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<C64> = x.iter().map(|&v| C64::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, b) in buf.iter_mut().enumerate() {
        let kk = if k <= n / 2 {
            k as f64
        } else {
            k as f64 - n as f64
        };
        if 2 * k == n {
            *b = C64::new(0.0, 0.0);
        } else {
            *b *= C64::from_polar(1.0, 2.0 * PI * kk * d / n as f64);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

/// Exact far-field plane wave from `doa`, circular in time.
pub fn plane_wave(geom: &ArrayGeometry, doa: Doa, signal: &[f64], fs: f64) -> MultichannelAudio {
    plane_waves(geom, &[(doa, signal)], fs)
}

pub fn plane_waves(geom: &ArrayGeometry, waves: &[(Doa, &[f64])], fs: f64) -> MultichannelAudio {
    let n = waves[0].1.len();
    let c = geom.centroid();
    let chans = (0..geom.mic_count())
        .map(|m| {
            let mut out = vec![0.0; n];
            for (doa, sig) in waves {
                let lead = fs / SPEED_OF_SOUND * doa.to_unit_vector().dot(&(geom.mic(m) - c));
                out.iter_mut()
                    .zip(advance(sig, lead))
                    .for_each(|(o, v)| *o += v);
            }
            out
        })
        .collect();
    MultichannelAudio::new(chans, fs, 0.0).unwrap()
}

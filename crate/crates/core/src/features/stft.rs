//! Short-time Fourier analysis without centre padding, and overlap-add
//! resynthesis normalised by the summed analysis window.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array2;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{FeatureError, FeatureKind, FeatureMap, Result};
use crate::audio::AudioBuffer;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StftConfig {
    pub n_fft: usize,
    pub win_len: usize,
    pub hop: usize,
}

impl StftConfig {
    /// 32 ms Hamming window, 16 ms hop, FFT length 512 (or the next power of
    /// two if the window is longer). At 16 kHz: 512 / 256 / 512.
    pub fn speech(sample_rate: u32) -> Self {
        let win_len = (0.032 * sample_rate as f64).round().max(1.0) as usize;
        let hop = (0.016 * sample_rate as f64).round().max(1.0) as usize;
        StftConfig {
            n_fft: win_len.next_power_of_two().max(512),
            win_len,
            hop,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.hop == 0 || self.win_len == 0 || self.win_len > self.n_fft || self.hop > self.win_len {
            return Err(FeatureError::BadStftConfig(format!("{self:?}")));
        }
        Ok(())
    }

    pub fn bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    /// `1 + floor((n - win) / hop)` for `n >= win`.
    pub fn frame_count(&self, n: usize) -> Option<usize> {
        (n >= self.win_len).then(|| 1 + (n - self.win_len) / self.hop)
    }
}

/// Periodic Hamming window, `0.54 - 0.46 cos(2 pi n / len)`.
pub fn hamming(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / len as f64).cos())
        .collect()
}

/// Complex STFT of a signal: `frames x (n_fft / 2 + 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrogram {
    pub bins: Array2<Complex64>,
    pub config: StftConfig,
    pub sample_rate: u32,
    pub signal_len: usize,
}

impl Spectrogram {
    pub fn magnitude(&self) -> FeatureMap {
        FeatureMap::new(
            self.bins.mapv(|c| c.norm()),
            self.sample_rate as f64 / self.config.hop as f64,
            FeatureKind::StftMagnitude,
        )
        .expect("magnitudes of a finite spectrum are finite and nonnegative")
    }
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut planner = FftPlanner::new();
    if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    }
}

pub fn stft(buffer: &AudioBuffer, config: &StftConfig) -> Result<Spectrogram> {
    config.validate()?;
    let frames = config.frame_count(buffer.len()).ok_or(FeatureError::TooShort {
        len: buffer.len(),
        need: config.win_len,
    })?;
    let window = hamming(config.win_len);
    let fft = plan(config.n_fft, false);
    let mut bins = Array2::zeros((frames, config.bins()));
    let mut frame = vec![Complex64::default(); config.n_fft];
    let samples = buffer.samples();
    for t in 0..frames {
        let start = t * config.hop;
        for (n, slot) in frame.iter_mut().enumerate() {
            *slot = if n < config.win_len {
                Complex64::new(samples[start + n] as f64 * window[n], 0.0)
            } else {
                Complex64::default()
            };
        }
        fft.process(&mut frame);
        for (k, &c) in frame[..config.bins()].iter().enumerate() {
            bins[[t, k]] = c;
        }
    }
    Ok(Spectrogram {
        bins,
        config: *config,
        sample_rate: buffer.sample_rate(),
        signal_len: buffer.len(),
    })
}

/// Overlap-add inverse of [`stft`]. Each sample is divided by the sum of the
/// analysis windows covering it (1.08 in the interior at 50 % overlap);
/// samples past the last frame are zero.
pub fn istft(spec: &Spectrogram) -> Vec<f64> {
    let cfg = spec.config;
    let window = hamming(cfg.win_len);
    let ifft = plan(cfg.n_fft, true);
    let mut out = vec![0.0; spec.signal_len];
    let mut weight = vec![0.0; spec.signal_len];
    let mut frame = vec![Complex64::default(); cfg.n_fft];
    for (t, row) in spec.bins.outer_iter().enumerate() {
        for (k, slot) in frame.iter_mut().enumerate() {
            // Hermitian extension of the one-sided spectrum
            *slot = if k < cfg.bins() { row[k] } else { row[cfg.n_fft - k].conj() };
        }
        // DC and Nyquist bins of a real signal are real
        frame[0].im = 0.0;
        if cfg.n_fft.is_multiple_of(2) {
            frame[cfg.n_fft / 2].im = 0.0;
        }
        ifft.process(&mut frame);
        let start = t * cfg.hop;
        for n in 0..cfg.win_len {
            out[start + n] += frame[n].re / cfg.n_fft as f64;
            weight[start + n] += window[n];
        }
    }
    for (y, w) in out.iter_mut().zip(weight) {
        *y = if w > 0.0 { *y / w } else { 0.0 };
    }
    out
}

/// Scales each bin of the noisy STFT by `mask`, keeps the noisy phase, and
/// resynthesises a signal of the same length as `noisy`.
pub fn apply_mask_resynth(noisy: &AudioBuffer, mask: &FeatureMap) -> Result<AudioBuffer> {
    let config = StftConfig::speech(noisy.sample_rate());
    let mut spec = stft(noisy, &config)?;
    if mask.shape() != spec.bins.dim() {
        return Err(FeatureError::ShapeMismatch {
            left: mask.shape(),
            right: spec.bins.dim(),
        });
    }
    if let Some(((frame, bin), &value)) = mask.values().indexed_iter().find(|(_, &v)| !(0.0..=1.0).contains(&v)) {
        return Err(FeatureError::MaskOutOfRange { frame, bin, value });
    }
    // |X| m e^{j angle X} == m X
    spec.bins.zip_mut_with(mask.values(), |c, &m| *c *= m);
    Ok(AudioBuffer::from_f64(&istft(&spec), noisy.sample_rate())?)
}

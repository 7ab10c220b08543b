//! Mono waveform container plus WAV I/O, resampling and length fitting.

mod resample;
mod wav;

use std::path::PathBuf;

use thiserror::Error;

pub use resample::{resample, Resampler};
pub use wav::{read_wav, read_wav_bytes, write_wav, write_wav_bytes, WavEncoding, WriteReport};

pub type Result<T> = std::result::Result<T, AudioError>;

#[derive(Error, Debug)]
pub enum AudioError {
    #[error("sample rate must be positive")]
    ZeroSampleRate,
    #[error("non-finite sample at index {0}")]
    NonFiniteSample(usize),
    #[error("malformed RIFF/WAVE header: {0}")]
    MalformedHeader(String),
    #[error("unsupported encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("unsupported channel count {0}, only mono is accepted")]
    UnsupportedChannels(u16),
    #[error("data chunk declares {declared} bytes but only {available} are present")]
    TruncatedData { declared: u64, available: u64 },
    #[error("target length must be at least one sample")]
    EmptyTarget,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Mono waveform with its sample rate.
///
/// Samples are stored as `f32`; every derived quantity (powers, levels,
/// spectra) is accumulated in `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f32>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(AudioError::ZeroSampleRate);
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(AudioError::NonFiniteSample(i));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    /// Builds a buffer from `f64` samples, rounding each to `f32`.
    pub fn from_f64(samples: &[f64], sample_rate: u32) -> Result<Self> {
        Self::new(samples.iter().map(|&s| s as f32).collect(), sample_rate)
    }

    pub fn zeros(len: usize, sample_rate: u32) -> Result<Self> {
        Self::new(vec![0.0; len], sample_rate)
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Returns `samples[start..start + len]` as a new buffer at the same rate.
    pub fn segment(&self, start: usize, len: usize) -> Option<AudioBuffer> {
        let end = start.checked_add(len)?;
        let samples = self.samples.get(start..end)?.to_vec();
        Some(AudioBuffer {
            samples,
            sample_rate: self.sample_rate,
        })
    }

    /// Multiplies every sample by `gain`, computed in `f64`.
    pub fn scaled(&self, gain: f64) -> Result<AudioBuffer> {
        let samples = self
            .samples
            .iter()
            .map(|&s| (s as f64 * gain) as f32)
            .collect();
        AudioBuffer::new(samples, self.sample_rate)
    }
}

/// Zero-pads at the tail or truncates so the result has exactly `target_len` samples.
pub fn fit_length(buffer: &AudioBuffer, target_len: usize) -> Result<AudioBuffer> {
    if target_len == 0 {
        return Err(AudioError::EmptyTarget);
    }
    let mut samples = buffer.samples[..buffer.len().min(target_len)].to_vec();
    samples.resize(target_len, 0.0);
    Ok(AudioBuffer {
        samples,
        sample_rate: buffer.sample_rate,
    })
}

//! Noisy mixtures at a target SNR: `x[n] = s[n] + c · v[n]` with
//! `c = sqrt(P_s / (P_v · 10^(SNR/10)))`.

use thiserror::Error;

use crate::audio::{AudioBuffer, AudioError};
use crate::levels::{active_level_p56, LevelError, NoisePowerEstimator};

#[derive(Error, Debug)]
pub enum MixError {
    #[error("power must be positive and finite, got {0}")]
    NonPositivePower(f64),
    #[error("sample rates differ: clean {clean} Hz, noise {noise} Hz")]
    RateMismatch { clean: u32, noise: u32 },
    #[error("noise of {noise_len} samples cannot cover {clean_len} samples from offset {offset}")]
    NoiseTooShort {
        noise_len: usize,
        clean_len: usize,
        offset: usize,
    },
    #[error("clean speech: {0}")]
    Clean(#[source] LevelError),
    #[error("noise: {0}")]
    Noise(#[source] LevelError),
    #[error(transparent)]
    Audio(#[from] AudioError),
}

pub type Result<T> = std::result::Result<T, MixError>;

#[derive(Clone, Debug, PartialEq)]
pub struct MixResult {
    pub mixture: AudioBuffer,
    /// Gain applied to the noise excerpt.
    pub scale_c: f64,
    /// Start of the noise excerpt within the noise recording.
    pub noise_offset: usize,
    pub speech_power: f64,
    pub noise_power: f64,
}

pub fn scaling_factor(speech_power: f64, noise_power: f64, snr_db: f64) -> Result<f64> {
    for p in [speech_power, noise_power] {
        if !(p > 0.0 && p.is_finite()) {
            return Err(MixError::NonPositivePower(p));
        }
    }
    Ok((speech_power / (noise_power * 10f64.powf(snr_db / 10.0))).sqrt())
}

/// `clean[n] + c · noise[n]` evaluated in `f64` and stored as `f32`. This is
/// the only place a mixture sample is formed, so a build log holding `c` and
/// the offset replays bit-exactly.
pub fn apply_mix(clean: &AudioBuffer, noise_segment: &AudioBuffer, scale_c: f64) -> Result<AudioBuffer> {
    debug_assert_eq!(clean.len(), noise_segment.len());
    let samples = clean
        .samples()
        .iter()
        .zip(noise_segment.samples())
        .map(|(&s, &v)| (s as f64 + scale_c * v as f64) as f32)
        .collect();
    Ok(AudioBuffer::new(samples, clean.sample_rate())?)
}

pub fn noise_segment(clean: &AudioBuffer, noise: &AudioBuffer, offset: usize) -> Result<AudioBuffer> {
    if clean.sample_rate() != noise.sample_rate() {
        return Err(MixError::RateMismatch {
            clean: clean.sample_rate(),
            noise: noise.sample_rate(),
        });
    }
    noise
        .segment(offset, clean.len())
        .ok_or(MixError::NoiseTooShort {
            noise_len: noise.len(),
            clean_len: clean.len(),
            offset,
        })
}

/// Mixes `clean` with the excerpt of `noise` starting at `offset` so that the
/// speech-to-noise power ratio equals `snr_db`. Speech power is the active
/// speech level of `clean`; noise power follows `estimator` on the excerpt.
/// The mixture is not renormalized and may exceed [-1, 1].
pub fn mix(
    clean: &AudioBuffer,
    noise: &AudioBuffer,
    snr_db: f64,
    offset: usize,
    estimator: NoisePowerEstimator,
) -> Result<MixResult> {
    let segment = noise_segment(clean, noise, offset)?;
    let speech_power = active_level_p56(clean).map_err(MixError::Clean)?.active_power;
    let noise_power = estimator.measure(&segment).map_err(MixError::Noise)?;
    let scale_c = scaling_factor(speech_power, noise_power, snr_db)?;
    let mixture = apply_mix(clean, &segment, scale_c)?;
    Ok(MixResult {
        mixture,
        scale_c,
        noise_offset: offset,
        speech_power,
        noise_power,
    })
}

//! Signal levels: active speech level, mean power, voice activity and the
//! frame-energy SNR estimate used to screen recordings.

mod p56;
mod vad;

use thiserror::Error;

use crate::audio::AudioBuffer;

pub use p56::{active_level_p56, ActiveLevelReport, ENVELOPE_TIME_CONSTANT_S, HANGOVER_S, MARGIN_DB};
pub use vad::{frame_len_for, vad_frames, EnergyVad, FramePartition, VoiceActivityDetector};

pub type Result<T> = std::result::Result<T, LevelError>;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum LevelError {
    #[error("no active speech found")]
    NoActiveSpeech,
    #[error("sample rate {0} Hz is below the 8000 Hz minimum")]
    SampleRateTooLow(u32),
    #[error("signal of {len} samples is shorter than the required {need}")]
    TooShort { len: usize, need: usize },
    #[error("frame length must be at least one sample")]
    ZeroFrameLength,
    #[error("SNR estimate undefined: {0}")]
    UndefinedEstimate(&'static str),
    #[error("frame index {index} out of range for {frames} whole frames")]
    FrameOutOfRange { index: usize, frames: usize },
}

/// How the noise power `P_v` is measured when mixing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum NoisePowerEstimator {
    /// Active level of the noise excerpt, measured like the speech.
    #[default]
    ActiveLevel,
    /// Plain mean square of the excerpt, for stationary noise.
    MeanPower,
}

impl NoisePowerEstimator {
    pub fn measure(self, buffer: &AudioBuffer) -> Result<f64> {
        match self {
            NoisePowerEstimator::ActiveLevel => Ok(active_level_p56(buffer)?.active_power),
            NoisePowerEstimator::MeanPower => Ok(mean_power(buffer)),
        }
    }
}

impl std::str::FromStr for NoisePowerEstimator {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "p56" => Ok(NoisePowerEstimator::ActiveLevel),
            "mean" => Ok(NoisePowerEstimator::MeanPower),
            other => Err(format!("unknown noise power estimator `{other}` (expected p56 or mean)")),
        }
    }
}

impl std::fmt::Display for NoisePowerEstimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NoisePowerEstimator::ActiveLevel => "p56",
            NoisePowerEstimator::MeanPower => "mean",
        })
    }
}

/// `(1/N) Σ x²`; zero for an empty buffer.
pub fn mean_power(buffer: &AudioBuffer) -> f64 {
    if buffer.is_empty() {
        return 0.0;
    }
    let sum: f64 = buffer.samples().iter().map(|&x| (x as f64).powi(2)).sum();
    sum / buffer.len() as f64
}

/// Energy of every whole frame of length `frame_len`; the trailing partial
/// frame is discarded.
pub fn frame_energies(buffer: &AudioBuffer, frame_len: usize) -> Result<Vec<f64>> {
    if frame_len == 0 {
        return Err(LevelError::ZeroFrameLength);
    }
    if buffer.len() < frame_len {
        return Err(LevelError::TooShort {
            len: buffer.len(),
            need: frame_len,
        });
    }
    Ok(buffer
        .samples()
        .chunks_exact(frame_len)
        .map(|frame| frame.iter().map(|&x| (x as f64).powi(2)).sum())
        .collect())
}

/// Ratio, in dB, of the mean speech-frame energy to the mean non-speech-frame
/// energy.
///
/// When the non-speech frames carry no energy at all the estimate is
/// `f64::INFINITY` (digitally silent background). Both sets empty of energy
/// is reported as undefined.
pub fn estimate_snr(buffer: &AudioBuffer, partition: &FramePartition) -> Result<f64> {
    if partition.speech.is_empty() {
        return Err(LevelError::UndefinedEstimate("no speech frames"));
    }
    if partition.nonspeech.is_empty() {
        return Err(LevelError::UndefinedEstimate("no non-speech frames"));
    }
    let energies = frame_energies(buffer, partition.frame_len)?;
    let mean_of = |frames: &[usize]| -> Result<f64> {
        let mut sum = 0.0;
        for &l in frames {
            sum += energies.get(l).ok_or(LevelError::FrameOutOfRange {
                index: l,
                frames: energies.len(),
            })?;
        }
        Ok(sum / frames.len() as f64)
    };
    let speech = mean_of(&partition.speech)?;
    let noise = mean_of(&partition.nonspeech)?;
    match (speech > 0.0, noise > 0.0) {
        (_, true) => Ok(10.0 * (speech / noise).log10()),
        (true, false) => Ok(f64::INFINITY),
        (false, false) => Err(LevelError::UndefinedEstimate("all frames are silent")),
    }
}

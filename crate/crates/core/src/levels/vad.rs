//! Frame-wise voice activity detection.

use super::{frame_energies, LevelError, Result};
use crate::audio::AudioBuffer;

/// Partition of the whole frames of a signal into speech (`speech`) and
/// non-speech (`nonspeech`) frame indices. Both lists are sorted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FramePartition {
    pub frame_len: usize,
    pub speech: Vec<usize>,
    pub nonspeech: Vec<usize>,
}

impl FramePartition {
    pub fn frame_count(&self) -> usize {
        self.speech.len() + self.nonspeech.len()
    }
}

/// Anything that can label frames of length `frame_len` as speech or not.
pub trait VoiceActivityDetector: Send + Sync {
    fn partition(&self, buffer: &AudioBuffer, frame_len: usize) -> Result<FramePartition>;
}

/// Adaptive-energy detector: a frame is speech when its energy exceeds the
/// noise floor by `threshold_db`, the floor being a low percentile of all
/// frame energies in the signal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyVad {
    /// Percentile in [0, 100] used as the noise floor.
    pub floor_percentile: f64,
    pub threshold_db: f64,
}

impl Default for EnergyVad {
    fn default() -> Self {
        EnergyVad {
            floor_percentile: 10.0,
            threshold_db: 6.0,
        }
    }
}

impl EnergyVad {
    fn noise_floor(&self, energies: &[f64]) -> f64 {
        let mut sorted = energies.to_vec();
        sorted.sort_by(f64::total_cmp);
        // lower nearest-rank percentile
        let rank = (self.floor_percentile / 100.0 * (sorted.len() - 1) as f64).floor() as usize;
        sorted[rank.min(sorted.len() - 1)]
    }
}

impl VoiceActivityDetector for EnergyVad {
    fn partition(&self, buffer: &AudioBuffer, frame_len: usize) -> Result<FramePartition> {
        let energies = frame_energies(buffer, frame_len)?;
        let threshold = self.noise_floor(&energies) * 10f64.powf(self.threshold_db / 10.0);
        let (speech, nonspeech) = (0..energies.len()).partition(|&l| energies[l] > threshold);
        Ok(FramePartition {
            frame_len,
            speech,
            nonspeech,
        })
    }
}

/// Partitions `buffer` with the default [`EnergyVad`].
pub fn vad_frames(buffer: &AudioBuffer, frame_len: usize) -> Result<FramePartition> {
    EnergyVad::default().partition(buffer, frame_len)
}

/// Frame length for a duration in milliseconds at the buffer's rate.
pub fn frame_len_for(sample_rate: u32, frame_ms: f64) -> Result<usize> {
    let k = (sample_rate as f64 * frame_ms / 1000.0).round() as usize;
    if k == 0 {
        return Err(LevelError::ZeroFrameLength);
    }
    Ok(k)
}

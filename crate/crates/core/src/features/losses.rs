use super::stft::{stft, StftConfig};
use super::{FeatureError, FeatureMap, Result};
use crate::audio::AudioBuffer;

/// Mean squared difference between two feature maps of equal shape and kind.
pub fn loss_fe(reference: &FeatureMap, degraded: &FeatureMap) -> Result<f64> {
    if reference.kind() != degraded.kind() {
        return Err(FeatureError::KindMismatch(reference.kind(), degraded.kind()));
    }
    if reference.shape() != degraded.shape() {
        return Err(FeatureError::ShapeMismatch {
            left: reference.shape(),
            right: degraded.shape(),
        });
    }
    let sum: f64 = reference
        .values()
        .iter()
        .zip(degraded.values())
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    Ok(sum / reference.values().len() as f64)
}

/// [`loss_fe`] on the STFT magnitudes of two equally long signals.
pub fn loss_spec_mse(reference: &AudioBuffer, degraded: &AudioBuffer) -> Result<f64> {
    if reference.len() != degraded.len() {
        return Err(FeatureError::LengthMismatch(reference.len(), degraded.len()));
    }
    if reference.sample_rate() != degraded.sample_rate() {
        return Err(FeatureError::RateMismatch {
            expected: reference.sample_rate(),
            got: degraded.sample_rate(),
        });
    }
    let config = StftConfig::speech(reference.sample_rate());
    let a = stft(reference, &config)?.magnitude();
    let b = stft(degraded, &config)?.magnitude();
    loss_fe(&a, &b)
}

/// Scale-invariant SDR in dB of `estimate` against `reference`.
///
/// Returns `+inf` when the estimate is an exact multiple of the reference.
pub fn si_sdr_slices(reference: &[f64], estimate: &[f64]) -> Result<f64> {
    if reference.len() != estimate.len() {
        return Err(FeatureError::LengthMismatch(reference.len(), estimate.len()));
    }
    let ref_energy: f64 = reference.iter().map(|r| r * r).sum();
    if ref_energy == 0.0 {
        return Err(FeatureError::ZeroReference);
    }
    let alpha = reference.iter().zip(estimate).map(|(r, e)| r * e).sum::<f64>() / ref_energy;
    let (target, residual) = reference
        .iter()
        .zip(estimate)
        .fold((0.0, 0.0), |(t, d), (r, e)| {
            let s = alpha * r;
            (t + s * s, d + (s - e).powi(2))
        });
    if residual == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (target / residual).log10())
}

pub fn si_sdr(reference: &AudioBuffer, estimate: &AudioBuffer) -> Result<f64> {
    let widen = |b: &AudioBuffer| b.samples().iter().map(|&v| v as f64).collect::<Vec<_>>();
    si_sdr_slices(&widen(reference), &widen(estimate))
}

//! Active speech level, ITU-T P.56 method B.
//!
//! The rectified signal is smoothed by two cascaded one-pole filters
//! (time constant 0.03 s). For a ladder of thresholds spaced 6.02 dB apart,
//! a sample counts as active while the envelope is at or above the threshold
//! or within 0.2 s of hangover after it fell below. Each threshold yields an
//! active level `A_j = 10 log10(sum_sq / count_j)`; the reported level is the
//! point where `A_j - 20 log10(c_j)` falls to the 15.9 dB margin, found by
//! linear interpolation in the dB domain between the bracketing thresholds.
//!
//! The threshold ladder is anchored to the envelope peak rather than to
//! digital full scale, so the measurement is equivariant under gain.

use super::{LevelError, Result};
use crate::audio::AudioBuffer;

pub const ENVELOPE_TIME_CONSTANT_S: f64 = 0.03;
pub const HANGOVER_S: f64 = 0.2;
pub const MARGIN_DB: f64 = 15.9;
/// Number of thresholds below the envelope peak (the ladder spans ~283 dB).
const LADDER_STEPS: usize = 47;
const MIN_SAMPLE_RATE: u32 = 8000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActiveLevelReport {
    /// Mean-square amplitude over the active portion.
    pub active_power: f64,
    /// Fraction of the signal judged active, in [0, 1].
    pub activity_factor: f64,
    /// Mean-square amplitude over all samples.
    pub long_term_power: f64,
}

impl ActiveLevelReport {
    pub fn active_level_db(&self) -> f64 {
        10.0 * self.active_power.log10()
    }
}

fn db_power(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn active_level_p56(buffer: &AudioBuffer) -> Result<ActiveLevelReport> {
    let fs = buffer.sample_rate();
    if fs < MIN_SAMPLE_RATE {
        return Err(LevelError::SampleRateTooLow(fs));
    }
    let smoother_len = (ENVELOPE_TIME_CONSTANT_S * fs as f64).ceil() as usize;
    if buffer.len() < smoother_len {
        return Err(LevelError::TooShort {
            len: buffer.len(),
            need: smoother_len,
        });
    }

    let g = (-1.0 / (fs as f64 * ENVELOPE_TIME_CONSTANT_S)).exp();
    let hangover = (HANGOVER_S * fs as f64).round() as usize;

    let mut envelope = Vec::with_capacity(buffer.len());
    let (mut p, mut q) = (0.0f64, 0.0f64);
    let mut sum_sq = 0.0f64;
    let mut peak = 0.0f64;
    for &x in buffer.samples() {
        let x = x as f64;
        sum_sq += x * x;
        p = g * p + (1.0 - g) * x.abs();
        q = g * q + (1.0 - g) * p;
        peak = peak.max(q);
        envelope.push(q);
    }
    if sum_sq == 0.0 || peak == 0.0 {
        return Err(LevelError::NoActiveSpeech);
    }

    // ascending: c_0 = peak * 2^-47 ... c_47 = peak
    let thresholds: Vec<f64> = (0..=LADDER_STEPS)
        .map(|j| peak * (2.0f64).powi(j as i32 - LADDER_STEPS as i32))
        .collect();
    let mut counts = vec![0usize; thresholds.len()];
    let mut hang = vec![hangover; thresholds.len()];
    for &q in &envelope {
        for ((c, count), h) in thresholds.iter().zip(&mut counts).zip(&mut hang) {
            if q >= *c {
                *count += 1;
                *h = 0;
            } else if *h < hangover {
                *count += 1;
                *h += 1;
            }
        }
    }

    let n = buffer.len() as f64;
    let long_term_power = sum_sq / n;
    let level_at = |j: usize| db_power(sum_sq / counts[j] as f64);
    let excess_at = |j: usize| level_at(j) - 2.0 * db_power(thresholds[j]);

    let mut active_db = None;
    let mut last_counted = None;
    for (j, &count) in counts.iter().enumerate().take(thresholds.len()) {
        if count == 0 {
            break;
        }
        last_counted = Some(j);
        let excess = excess_at(j);
        if excess <= MARGIN_DB {
            active_db = Some(if j == 0 {
                level_at(0)
            } else {
                let above = excess_at(j - 1);
                let t = (above - MARGIN_DB) / (above - excess);
                level_at(j - 1) + t * (level_at(j) - level_at(j - 1))
            });
            break;
        }
    }
    // No crossing: isolated transients whose envelope never settles. Fall
    // back to the highest threshold that still saw activity.
    let active_db = match (active_db, last_counted) {
        (Some(a), _) => a,
        (None, Some(j)) => level_at(j),
        (None, None) => return Err(LevelError::NoActiveSpeech),
    };

    let active_power = 10f64.powf(active_db / 10.0);
    let activity_factor = (long_term_power / active_power).clamp(0.0, 1.0);
    if activity_factor == 0.0 {
        return Err(LevelError::NoActiveSpeech);
    }
    Ok(ActiveLevelReport {
        active_power,
        activity_factor,
        long_term_power,
    })
}

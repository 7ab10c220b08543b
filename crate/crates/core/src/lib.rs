//! Screening of crowd-sourced speech, simulation of noisy-speech corpora at
//! exact SNRs, and the spectral and learned-feature distances used to compare
//! a reference signal with a degraded one.

pub mod audio;
pub mod dataset;
pub mod features;
pub mod levels;
pub mod mixer;
pub mod screening;
pub mod tsv;

pub use audio::{AudioBuffer, AudioError};
pub use features::{FeatureError, FeatureKind, FeatureMap};
pub use levels::{active_level_p56, estimate_snr, mean_power, LevelError, NoisePowerEstimator};
pub use mixer::{mix, MixError, MixResult};

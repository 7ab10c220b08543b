//! Time-frequency and learned representations of audio, and the distances
//! computed between a reference and a degraded signal.

mod container;
mod encoder;
mod fixture;
mod losses;
mod stft;

use ndarray::Array2;
use thiserror::Error;

use crate::audio::AudioError;

pub use container::{read_container, read_container_bytes, write_container, write_container_bytes, EncoderCheckpoint};
pub use encoder::{
    feature_encoder_forward, gelu, Activation, ConvLayerSpec, EncoderWeights, FeatureEncoderSpec, LayerWeights,
    Normalization, DEFAULT_NORM_EPS,
};
pub use fixture::{read_fixture, read_fixture_bytes, write_fixture, write_fixture_bytes};
pub use losses::{loss_fe, loss_spec_mse, si_sdr, si_sdr_slices};
pub use stft::{apply_mask_resynth, hamming, istft, stft, Spectrogram, StftConfig};

#[derive(Error, Debug)]
pub enum FeatureError {
    #[error("signal of {len} samples is shorter than the required {need}")]
    TooShort { len: usize, need: usize },
    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch { left: (usize, usize), right: (usize, usize) },
    #[error("feature kinds differ: {0:?} vs {1:?}")]
    KindMismatch(FeatureKind, FeatureKind),
    #[error("mask value {value} at ({frame}, {bin}) is outside [0, 1]")]
    MaskOutOfRange { frame: usize, bin: usize, value: f64 },
    #[error("invalid STFT configuration: {0}")]
    BadStftConfig(String),
    #[error("invalid encoder spec: {0}")]
    BadSpec(String),
    #[error("weights do not match the encoder layout: {0}")]
    WeightMismatch(String),
    #[error("sample rate {got} Hz differs from the expected {expected} Hz")]
    RateMismatch { expected: u32, got: u32 },
    #[error("length mismatch: {0} vs {1} samples")]
    LengthMismatch(usize, usize),
    #[error("reference signal is all zeros")]
    ZeroReference,
    #[error("feature map must be at least 1x1 and finite")]
    InvalidMap,
    #[error("malformed container: {0}")]
    Container(String),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, FeatureError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureKind {
    StftMagnitude,
    EncoderFeatures,
}

/// A `T x F` real matrix (frames by features) with its frame rate.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    values: Array2<f64>,
    frame_rate: f64,
    kind: FeatureKind,
}

impl FeatureMap {
    pub fn new(values: Array2<f64>, frame_rate: f64, kind: FeatureKind) -> Result<Self> {
        let (t, f) = values.dim();
        if t == 0 || f == 0 || values.iter().any(|v| !v.is_finite()) {
            return Err(FeatureError::InvalidMap);
        }
        if kind == FeatureKind::StftMagnitude && values.iter().any(|&v| v < 0.0) {
            return Err(FeatureError::InvalidMap);
        }
        Ok(FeatureMap {
            values,
            frame_rate,
            kind,
        })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn frames(&self) -> usize {
        self.values.nrows()
    }

    pub fn features(&self) -> usize {
        self.values.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.dim()
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    /// Same map with every value multiplied by `g`.
    pub fn scaled(&self, g: f64) -> Result<Self> {
        FeatureMap::new(&self.values * g, self.frame_rate, self.kind)
    }
}

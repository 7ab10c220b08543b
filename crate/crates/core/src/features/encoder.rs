//! Stack of valid 1-D convolutions, each followed by an optional
//! normalization and an exact GELU, mapping a waveform to a `T x F` map.

use ndarray::{s, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::{FeatureError, FeatureKind, FeatureMap, Result};
use crate::audio::AudioBuffer;

pub const DEFAULT_NORM_EPS: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Normalization {
    None,
    /// Statistics over each group of channels and all time steps.
    GroupNorm { groups: usize },
    /// Statistics over all channels, separately at each time step.
    LayerNorm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Gelu,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvLayerSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub has_bias: bool,
    pub normalization: Normalization,
    pub activation: Activation,
}

impl ConvLayerSpec {
    pub fn output_len(&self, n: usize) -> Option<usize> {
        (n >= self.kernel).then(|| (n - self.kernel) / self.stride + 1)
    }

    fn weight_len(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureEncoderSpec {
    pub layers: Vec<ConvLayerSpec>,
    pub expected_input_rate: u32,
    #[serde(default = "default_eps")]
    pub norm_eps: f64,
}

fn default_eps() -> f64 {
    DEFAULT_NORM_EPS
}

impl FeatureEncoderSpec {
    /// Seven-layer waveform encoder with kernels (10,3,3,3,3,2,2) and strides
    /// (5,2,2,2,2,2,2) at 16 kHz. With `layer_norm` every layer is followed
    /// by a channel layer norm; otherwise only the first layer carries a
    /// per-channel group norm.
    pub fn hubert_like(width: usize, layer_norm: bool) -> Self {
        let kernels = [10, 3, 3, 3, 3, 2, 2];
        let strides = [5, 2, 2, 2, 2, 2, 2];
        let layers = (0..7)
            .map(|i| ConvLayerSpec {
                in_channels: if i == 0 { 1 } else { width },
                out_channels: width,
                kernel: kernels[i],
                stride: strides[i],
                has_bias: false,
                normalization: match (layer_norm, i) {
                    (true, _) => Normalization::LayerNorm,
                    (false, 0) => Normalization::GroupNorm { groups: width },
                    (false, _) => Normalization::None,
                },
                activation: Activation::Gelu,
            })
            .collect();
        FeatureEncoderSpec {
            layers,
            expected_input_rate: 16000,
            norm_eps: DEFAULT_NORM_EPS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(FeatureError::BadSpec(m));
        if self.layers.is_empty() {
            return bad("no layers".into());
        }
        if self.expected_input_rate == 0 {
            return bad("zero input rate".into());
        }
        if !(self.norm_eps.is_finite() && self.norm_eps > 0.0) {
            return bad(format!("norm_eps {} must be positive", self.norm_eps));
        }
        let mut channels = 1;
        for (i, l) in self.layers.iter().enumerate() {
            if l.in_channels != channels {
                return bad(format!("layer {i} expects {} input channels, got {channels}", l.in_channels));
            }
            if l.out_channels == 0 || l.stride == 0 || l.kernel < l.stride {
                return bad(format!("layer {i} needs out_channels >= 1 and kernel >= stride >= 1"));
            }
            if let Normalization::GroupNorm { groups } = l.normalization {
                if groups == 0 || l.out_channels % groups != 0 {
                    return bad(format!("layer {i}: {groups} groups do not divide {} channels", l.out_channels));
                }
            }
            channels = l.out_channels;
        }
        Ok(())
    }

    /// Frames produced for an input of `n` samples, if it covers the
    /// receptive field.
    pub fn output_frames(&self, n: usize) -> Option<usize> {
        self.layers.iter().try_fold(n, |len, l| l.output_len(len))
    }

    /// Smallest input length that yields one output frame.
    pub fn receptive_field(&self) -> usize {
        self.layers
            .iter()
            .rev()
            .fold(1, |need, l| (need - 1) * l.stride + l.kernel)
    }

    pub fn total_stride(&self) -> usize {
        self.layers.iter().map(|l| l.stride).product()
    }

    pub fn output_features(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_channels)
    }
}

/// Parameters of one layer, stored as little-endian-friendly `f32`.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerWeights {
    /// Row-major `(out_channels, in_channels, kernel)`.
    pub conv: Vec<f32>,
    pub bias: Option<Vec<f32>>,
    /// Affine scale and shift of the normalization, one value per channel.
    pub norm_scale: Option<Vec<f32>>,
    pub norm_shift: Option<Vec<f32>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderWeights {
    pub layers: Vec<LayerWeights>,
}

impl EncoderWeights {
    /// Fills every convolution weight and bias with successive values of
    /// `draw`; normalizations start at unit scale and zero shift.
    pub fn generate(spec: &FeatureEncoderSpec, mut draw: impl FnMut() -> f32) -> Self {
        let layers = spec
            .layers
            .iter()
            .map(|l| LayerWeights {
                conv: (0..l.weight_len()).map(|_| draw()).collect(),
                bias: l.has_bias.then(|| (0..l.out_channels).map(|_| draw()).collect()),
                norm_scale: (l.normalization != Normalization::None).then(|| vec![1.0; l.out_channels]),
                norm_shift: (l.normalization != Normalization::None).then(|| vec![0.0; l.out_channels]),
            })
            .collect();
        EncoderWeights { layers }
    }

    pub fn check(&self, spec: &FeatureEncoderSpec) -> Result<()> {
        let bad = |m: String| Err(FeatureError::WeightMismatch(m));
        if self.layers.len() != spec.layers.len() {
            return bad(format!("{} weight layers for {} spec layers", self.layers.len(), spec.layers.len()));
        }
        for (i, (w, l)) in self.layers.iter().zip(&spec.layers).enumerate() {
            if w.conv.len() != l.weight_len() {
                return bad(format!("layer {i}: {} conv weights, expected {}", w.conv.len(), l.weight_len()));
            }
            let per_channel = |v: &Option<Vec<f32>>, wanted: bool| match v {
                Some(v) => wanted && v.len() == l.out_channels,
                None => !wanted,
            };
            let normed = l.normalization != Normalization::None;
            if !per_channel(&w.bias, l.has_bias)
                || !per_channel(&w.norm_scale, normed)
                || !per_channel(&w.norm_shift, normed)
            {
                return bad(format!("layer {i}: bias or normalization parameters do not match"));
            }
        }
        Ok(())
    }
}

/// Exact GELU, `x * Phi(x)` with the Gaussian CDF written through `erf`.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

/// Valid strided convolution of `x` (`in x n`) as one matrix product over
/// unfolded patches.
fn conv1d(x: &Array2<f64>, layer: &ConvLayerSpec, w: &LayerWeights) -> Array2<f64> {
    let (cin, n) = x.dim();
    let t_out = layer.output_len(n).expect("caller checked the receptive field");
    let k = layer.kernel;
    let mut patches = Array2::zeros((cin * k, t_out));
    for c in 0..cin {
        for j in 0..k {
            let src = x.slice(s![c, j..j + (t_out - 1) * layer.stride + 1; layer.stride]);
            patches.row_mut(c * k + j).assign(&src);
        }
    }
    let weights = Array2::from_shape_vec(
        (layer.out_channels, cin * k),
        w.conv.iter().map(|&v| v as f64).collect(),
    )
    .expect("weight length checked against the layer layout");
    let mut y = weights.dot(&patches);
    if let Some(b) = &w.bias {
        for (mut row, &bias) in y.outer_iter_mut().zip(b) {
            row += bias as f64;
        }
    }
    y
}

fn normalize(y: &mut Array2<f64>, norm: Normalization, w: &LayerWeights, eps: f64) {
    let (channels, _) = y.dim();
    match norm {
        Normalization::None => return,
        Normalization::GroupNorm { groups } => {
            let per = channels / groups;
            for g in 0..groups {
                let mut block = y.slice_mut(s![g * per..(g + 1) * per, ..]);
                let count = block.len() as f64;
                let mean = block.sum() / count;
                let var = block.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / count;
                let inv = 1.0 / (var + eps).sqrt();
                block.mapv_inplace(|v| (v - mean) * inv);
            }
        }
        Normalization::LayerNorm => {
            for mut col in y.axis_iter_mut(Axis(1)) {
                let mean = col.sum() / channels as f64;
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / channels as f64;
                let inv = 1.0 / (var + eps).sqrt();
                col.mapv_inplace(|v| (v - mean) * inv);
            }
        }
    }
    let scale = w.norm_scale.as_ref().expect("checked");
    let shift = w.norm_shift.as_ref().expect("checked");
    for ((mut row, &a), &b) in y.outer_iter_mut().zip(scale).zip(shift) {
        row.mapv_inplace(|v| v * a as f64 + b as f64);
    }
}

/// Runs the encoder over a mono buffer and returns frames by channels.
pub fn feature_encoder_forward(
    buffer: &AudioBuffer,
    spec: &FeatureEncoderSpec,
    weights: &EncoderWeights,
) -> Result<FeatureMap> {
    spec.validate()?;
    weights.check(spec)?;
    if buffer.sample_rate() != spec.expected_input_rate {
        return Err(FeatureError::RateMismatch {
            expected: spec.expected_input_rate,
            got: buffer.sample_rate(),
        });
    }
    if spec.output_frames(buffer.len()).is_none() {
        return Err(FeatureError::TooShort {
            len: buffer.len(),
            need: spec.receptive_field(),
        });
    }
    let samples: Vec<f64> = buffer.samples().iter().map(|&v| v as f64).collect();
    let mut x = Array2::from_shape_vec((1, samples.len()), samples).expect("one row");
    for (layer, w) in spec.layers.iter().zip(&weights.layers) {
        let mut y = conv1d(&x, layer, w);
        normalize(&mut y, layer.normalization, w, spec.norm_eps);
        match layer.activation {
            Activation::Gelu => y.mapv_inplace(gelu),
        }
        x = y;
    }
    let frame_rate = spec.expected_input_rate as f64 / spec.total_stride() as f64;
    FeatureMap::new(x.reversed_axes().as_standard_layout().into_owned(), frame_rate, FeatureKind::EncoderFeatures)
}

//! `.fenc` weight container.
//!
//! ```text
//! "FENC" | u32 version (=1) | u32 header length | UTF-8 JSON header | f32 tensors
//! ```
//!
//! All integers and floats are little-endian. The JSON header carries the
//! encoder spec (`layers`, `expected_input_rate`, optional `norm_eps`) plus an
//! optional free-text `source`. For each layer the tensors follow in this
//! order: convolution weight `(out, in, kernel)` row-major, bias if
//! `has_bias`, then normalization scale and shift if the layer is normalized.
//! The file must end exactly after the last tensor.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::encoder::{EncoderWeights, FeatureEncoderSpec, LayerWeights, Normalization};
use super::{FeatureError, Result};

const MAGIC: &[u8; 4] = b"FENC";
const VERSION: u32 = 1;

/// A decoded container: the layer layout, its weights and where they came from.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderCheckpoint {
    pub spec: FeatureEncoderSpec,
    pub weights: EncoderWeights,
    pub source: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    #[serde(flatten)]
    spec: FeatureEncoderSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source: Option<String>,
}

fn malformed(msg: impl Into<String>) -> FeatureError {
    FeatureError::Container(msg.into())
}

pub fn write_container_bytes(checkpoint: &EncoderCheckpoint) -> Result<Vec<u8>> {
    checkpoint.spec.validate()?;
    checkpoint.weights.check(&checkpoint.spec)?;
    let header = serde_json::to_vec(&Header {
        spec: checkpoint.spec.clone(),
        source: checkpoint.source.clone(),
    })
    .map_err(|e| malformed(e.to_string()))?;
    let mut out = Vec::with_capacity(12 + header.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for layer in &checkpoint.weights.layers {
        let tensors = [Some(&layer.conv), layer.bias.as_ref(), layer.norm_scale.as_ref(), layer.norm_shift.as_ref()];
        for t in tensors.into_iter().flatten() {
            for v in t {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            malformed(format!("need {n} bytes at offset {}, file has {}", self.pos, self.bytes.len()))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn tensor(&mut self, n: usize) -> Result<Vec<f32>> {
        let raw = self.take(n.checked_mul(4).ok_or_else(|| malformed("tensor too large"))?)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect())
    }
}

pub fn read_container_bytes(bytes: &[u8]) -> Result<EncoderCheckpoint> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4).ok() != Some(MAGIC.as_slice()) {
        return Err(malformed("missing FENC magic"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(malformed(format!("unsupported version {version}")));
    }
    let header_len = r.u32()? as usize;
    let header: Header =
        serde_json::from_slice(r.take(header_len)?).map_err(|e| malformed(format!("header: {e}")))?;
    let spec = header.spec;
    spec.validate()?;
    let mut layers = Vec::with_capacity(spec.layers.len());
    for l in &spec.layers {
        let normed = l.normalization != Normalization::None;
        layers.push(LayerWeights {
            conv: r.tensor(l.out_channels * l.in_channels * l.kernel)?,
            bias: if l.has_bias { Some(r.tensor(l.out_channels)?) } else { None },
            norm_scale: if normed { Some(r.tensor(l.out_channels)?) } else { None },
            norm_shift: if normed { Some(r.tensor(l.out_channels)?) } else { None },
        });
    }
    if r.pos != bytes.len() {
        return Err(malformed(format!("{} trailing bytes after the last tensor", bytes.len() - r.pos)));
    }
    Ok(EncoderCheckpoint {
        spec,
        weights: EncoderWeights { layers },
        source: header.source,
    })
}

pub fn read_container(path: &Path) -> Result<EncoderCheckpoint> {
    let bytes = std::fs::read(path).map_err(|source| FeatureError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_container_bytes(&bytes)
}

pub fn write_container(checkpoint: &EncoderCheckpoint, path: &Path) -> Result<()> {
    std::fs::write(path, write_container_bytes(checkpoint)?).map_err(|source| FeatureError::Io {
        path: path.to_path_buf(),
        source,
    })
}

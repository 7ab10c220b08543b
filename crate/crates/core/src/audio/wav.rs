//! RIFF/WAVE reading and writing for mono 16-bit PCM and 32-bit IEEE float.

use std::fs;
use std::path::Path;

use super::{AudioBuffer, AudioError, Result};

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum WavEncoding {
    Pcm16,
    #[default]
    Float32,
}

impl std::str::FromStr for WavEncoding {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "pcm16" => Ok(WavEncoding::Pcm16),
            "float32" => Ok(WavEncoding::Float32),
            other => Err(format!("unknown WAV encoding `{other}` (expected pcm16 or float32)")),
        }
    }
}

impl std::fmt::Display for WavEncoding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            WavEncoding::Pcm16 => "pcm16",
            WavEncoding::Float32 => "float32",
        })
    }
}

/// Outcome of a write. `clipped` counts samples outside [-1, 1] that were
/// saturated by 16-bit quantization; it is always zero for float output.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct WriteReport {
    pub clipped: usize,
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| AudioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_wav_bytes(&bytes)
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

struct Format {
    tag: u16,
    channels: u16,
    sample_rate: u32,
    bits: u16,
}

fn parse_fmt(body: &[u8]) -> Result<Format> {
    if body.len() < 16 {
        return Err(AudioError::MalformedHeader(format!(
            "fmt chunk is {} bytes, need at least 16",
            body.len()
        )));
    }
    let mut tag = u16_at(body, 0);
    if tag == FORMAT_EXTENSIBLE {
        // cbSize(2) validBits(2) channelMask(4), then the sub-format GUID whose
        // first two bytes carry the actual format tag.
        if body.len() < 40 {
            return Err(AudioError::MalformedHeader(
                "extensible fmt chunk too short".into(),
            ));
        }
        tag = u16_at(body, 24);
    }
    Ok(Format {
        tag,
        channels: u16_at(body, 2),
        sample_rate: u32_at(body, 4),
        bits: u16_at(body, 14),
    })
}

pub fn read_wav_bytes(bytes: &[u8]) -> Result<AudioBuffer> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(AudioError::MalformedHeader(
            "missing RIFF/WAVE signature".into(),
        ));
    }
    let mut fmt: Option<Format> = None;
    let mut pos = 12;
    loop {
        if pos + 8 > bytes.len() {
            return Err(AudioError::MalformedHeader("no data chunk found".into()));
        }
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as u64;
        let body_start = pos + 8;
        let available = (bytes.len() - body_start) as u64;
        if id == b"data" {
            let format = fmt.ok_or_else(|| {
                AudioError::MalformedHeader("data chunk precedes fmt chunk".into())
            })?;
            if size > available {
                return Err(AudioError::TruncatedData {
                    declared: size,
                    available,
                });
            }
            let data = &bytes[body_start..body_start + size as usize];
            return decode(&format, data);
        }
        if size > available {
            return Err(AudioError::MalformedHeader(format!(
                "chunk `{}` overruns the file",
                String::from_utf8_lossy(id)
            )));
        }
        if id == b"fmt " {
            fmt = Some(parse_fmt(&bytes[body_start..body_start + size as usize])?);
        }
        // chunks are word aligned
        pos = body_start + size as usize + (size as usize & 1);
    }
}

fn decode(format: &Format, data: &[u8]) -> Result<AudioBuffer> {
    if format.channels != 1 {
        return Err(AudioError::UnsupportedChannels(format.channels));
    }
    let samples: Vec<f32> = match (format.tag, format.bits) {
        (FORMAT_PCM, 16) => data
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes([c[0], c[1]]) as f32 / 32768.0)
            .collect(),
        (FORMAT_IEEE_FLOAT, 32) => data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect(),
        (tag, bits) => {
            return Err(AudioError::UnsupportedEncoding(format!(
                "format tag {tag} with {bits} bits per sample"
            )))
        }
    };
    AudioBuffer::new(samples, format.sample_rate)
}

pub fn write_wav(
    buffer: &AudioBuffer,
    path: impl AsRef<Path>,
    encoding: WavEncoding,
) -> Result<WriteReport> {
    let path = path.as_ref();
    let (bytes, report) = write_wav_bytes(buffer, encoding);
    fs::write(path, bytes).map_err(|source| AudioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(report)
}

/// Quantizes one sample to 16 bits: scale by 32768, round half away from zero,
/// saturate to the i16 range.
fn quantize_pcm16(s: f32) -> i16 {
    (s as f64 * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

pub fn write_wav_bytes(buffer: &AudioBuffer, encoding: WavEncoding) -> (Vec<u8>, WriteReport) {
    let (tag, bytes_per_sample) = match encoding {
        WavEncoding::Pcm16 => (FORMAT_PCM, 2u16),
        WavEncoding::Float32 => (FORMAT_IEEE_FLOAT, 4u16),
    };
    let data_len = buffer.len() * bytes_per_sample as usize;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&tag.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&buffer.sample_rate().to_le_bytes());
    out.extend_from_slice(&(buffer.sample_rate() * bytes_per_sample as u32).to_le_bytes());
    out.extend_from_slice(&bytes_per_sample.to_le_bytes());
    out.extend_from_slice(&(bytes_per_sample * 8).to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());

    let mut report = WriteReport::default();
    match encoding {
        WavEncoding::Pcm16 => {
            for &s in buffer.samples() {
                if s.abs() > 1.0 {
                    report.clipped += 1;
                }
                out.extend_from_slice(&quantize_pcm16(s).to_le_bytes());
            }
        }
        WavEncoding::Float32 => {
            for &s in buffer.samples() {
                out.extend_from_slice(&s.to_le_bytes());
            }
        }
    }
    (out, report)
}

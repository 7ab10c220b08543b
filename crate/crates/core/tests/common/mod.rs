//! Signal generators and brute-force reference implementations shared by the
//! integration tests. Nothing here calls into the library's numerics.

#![allow(dead_code)]

pub mod oracles;

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use noisemix_core::AudioBuffer;
use noisemix_core::AudioError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_noise(rng: &mut impl Rng, len: usize, amp: f64) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-amp..amp)).collect()
}

/// Alternating voiced bursts (harmonic tone under a raised-cosine envelope)
/// and pauses carrying a faint floor at `floor` amplitude.
pub fn speechlike(rng: &mut impl Rng, len: usize, rate: u32, floor: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let mut voiced = rng.gen_bool(0.5);
    while out.len() < len {
        let seg = ((rng.gen_range(0.08..0.35) * rate as f64) as usize).min(len - out.len());
        if voiced {
            let f0 = rng.gen_range(90.0..260.0);
            let amp = rng.gen_range(0.05..0.4);
            for n in 0..seg {
                let t = n as f64 / rate as f64;
                let env = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / seg as f64).cos();
                let tone: f64 = (1..=3)
                    .map(|h| (2.0 * std::f64::consts::PI * f0 * h as f64 * t).sin() / h as f64)
                    .sum();
                out.push(amp * env * tone + floor * rng.gen_range(-1.0..1.0));
            }
        } else {
            out.extend((0..seg).map(|_| floor * rng.gen_range(-1.0..1.0)));
        }
        voiced = !voiced;
    }
    out
}

/// First-order low-passed noise, a crude stand-in for environmental noise.
pub fn colored_noise(rng: &mut impl Rng, len: usize, amp: f64) -> Vec<f64> {
    let mut y = 0.0;
    (0..len)
        .map(|_| {
            y = 0.9 * y + 0.1 * rng.gen_range(-1.0..1.0);
            amp * 4.0 * y
        })
        .collect()
}

pub fn buffer(samples: &[f64], rate: u32) -> AudioBuffer {
    AudioBuffer::from_f64(samples, rate).unwrap()
}

/// In-memory audio keyed by path, usable wherever the library wants to load
/// a file.
#[derive(Default)]
pub struct MemoryAudio {
    pub files: HashMap<PathBuf, AudioBuffer>,
}

impl MemoryAudio {
    pub fn insert(&mut self, path: impl Into<PathBuf>, audio: AudioBuffer) {
        self.files.insert(path.into(), audio);
    }

    pub fn load(&self, path: &Path) -> Result<AudioBuffer, AudioError> {
        self.files.get(path).cloned().ok_or_else(|| AudioError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "not in memory"),
        })
    }
}

/// Relative path and contents of every file below `root`, sorted.
pub fn tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    fn walk(dir: &Path, root: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(&path, root, out);
            } else {
                out.push((path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort();
    out
}

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

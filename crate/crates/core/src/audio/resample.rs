//! Polyphase Kaiser-windowed sinc sample-rate conversion.

use super::{AudioBuffer, Result};

const TAPS: usize = 64;
const KAISER_BETA: f64 = 8.6;
const CUTOFF: f64 = 0.9;
/// Above this many phases the filter bank is evaluated on the fly instead of tabulated.
const MAX_TABLE_PHASES: usize = 4096;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > sum * 1e-17 {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Fixed-ratio resampler. The ratio `to / from` is reduced to `up / down`;
/// output sample `k` sits at input position `k * down / up` and is computed
/// from the 64 surrounding input samples with one of `up` filter phases.
#[derive(Clone, Debug)]
pub struct Resampler {
    from: u32,
    to: u32,
    up: u64,
    down: u64,
    bandwidth: f64,
    norm_i0: f64,
    table: Option<Vec<f64>>,
}

impl Resampler {
    pub fn new(from: u32, to: u32) -> Self {
        assert!(from > 0 && to > 0, "sample rates must be positive");
        let g = gcd(from as u64, to as u64);
        let mut r = Resampler {
            from,
            to,
            up: to as u64 / g,
            down: from as u64 / g,
            // cutoff 0.9 * min(Nyquist_in, Nyquist_out), normalised to the input Nyquist
            bandwidth: CUTOFF * from.min(to) as f64 / from as f64,
            norm_i0: bessel_i0(KAISER_BETA),
            table: None,
        };
        if r.up as usize <= MAX_TABLE_PHASES {
            let mut table = Vec::with_capacity(r.up as usize * TAPS);
            for phase in 0..r.up {
                table.extend(r.phase_taps(phase));
            }
            r.table = Some(table);
        }
        r
    }

    pub fn output_len(&self, input_len: usize) -> usize {
        let num = input_len as u128 * self.to as u128;
        ((2 * num + self.from as u128) / (2 * self.from as u128)) as usize
    }

    fn phase_taps(&self, phase: u64) -> [f64; TAPS] {
        let frac = phase as f64 / self.up as f64;
        let half = (TAPS / 2) as f64;
        let mut taps = [0.0; TAPS];
        let mut sum = 0.0;
        for (j, tap) in taps.iter_mut().enumerate() {
            // distance from the output position to input sample base + j - 31
            let d = frac + (TAPS / 2 - 1) as f64 - j as f64;
            let u = d / half;
            let window = if u.abs() <= 1.0 {
                bessel_i0(KAISER_BETA * (1.0 - u * u).sqrt()) / self.norm_i0
            } else {
                0.0
            };
            *tap = self.bandwidth * sinc(self.bandwidth * d) * window;
            sum += *tap;
        }
        for tap in &mut taps {
            *tap /= sum;
        }
        taps
    }

    pub fn process(&self, input: &[f32]) -> Vec<f32> {
        if self.from == self.to {
            return input.to_vec();
        }
        let n_out = self.output_len(input.len());
        let mut scratch = [0.0; TAPS];
        (0..n_out as u64)
            .map(|k| {
                let pos = k * self.down;
                let base = (pos / self.up) as i64;
                let phase = pos % self.up;
                let taps: &[f64] = match &self.table {
                    Some(t) => &t[phase as usize * TAPS..(phase as usize + 1) * TAPS],
                    None => {
                        scratch = self.phase_taps(phase);
                        &scratch
                    }
                };
                let first = base - (TAPS as i64 / 2 - 1);
                let mut acc = 0.0;
                for (j, &h) in taps.iter().enumerate() {
                    let i = first + j as i64;
                    if i >= 0 && (i as usize) < input.len() {
                        acc += h * input[i as usize] as f64;
                    }
                }
                acc as f32
            })
            .collect()
    }
}

/// Converts `buffer` to `target_rate`. Output length is
/// `round(len * target_rate / source_rate)`.
pub fn resample(buffer: &AudioBuffer, target_rate: u32) -> Result<AudioBuffer> {
    if target_rate == 0 {
        return Err(super::AudioError::ZeroSampleRate);
    }
    if target_rate == buffer.sample_rate() {
        return Ok(buffer.clone());
    }
    let r = Resampler::new(buffer.sample_rate(), target_rate);
    AudioBuffer::new(r.process(buffer.samples()), target_rate)
}

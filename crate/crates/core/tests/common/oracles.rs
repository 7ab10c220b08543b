//! Direct, unoptimised restatements of the formulas the library implements.

// Explicit index loops are the point here.
#![allow(clippy::needless_range_loop)]

use std::f64::consts::PI;

/// `10 log10(mean speech-frame energy / mean non-speech-frame energy)`, with
/// frame energy the plain sum of squares over `k` samples.
pub fn frame_snr(x: &[f64], k: usize, speech: &[usize], nonspeech: &[usize]) -> f64 {
    let energy = |l: usize| {
        let mut e = 0.0;
        for n in l * k..(l + 1) * k {
            e += x[n] * x[n];
        }
        e
    };
    let mut a = 0.0;
    for &l in speech {
        a += energy(l);
    }
    let mut b = 0.0;
    for &l in nonspeech {
        b += energy(l);
    }
    a /= speech.len() as f64;
    b /= nonspeech.len() as f64;
    10.0 * (a / b).log10()
}

pub fn hamming_periodic(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / len as f64).cos())
        .collect()
}

/// Per-frame direct DFT of the Hamming-windowed frames, bins `0..=n_fft/2`,
/// as (re, im) pairs.
pub fn stft_dft(x: &[f64], n_fft: usize, win: usize, hop: usize) -> Vec<Vec<(f64, f64)>> {
    let w = hamming_periodic(win);
    let frames = 1 + (x.len() - win) / hop;
    (0..frames)
        .map(|t| {
            (0..=n_fft / 2)
                .map(|k| {
                    let (mut re, mut im) = (0.0, 0.0);
                    for n in 0..win {
                        let v = x[t * hop + n] * w[n];
                        let ang = -2.0 * PI * (k * n) as f64 / n_fft as f64;
                        re += v * ang.cos();
                        im += v * ang.sin();
                    }
                    (re, im)
                })
                .collect()
        })
        .collect()
}

/// erf by its Maclaurin series for |x| < 3 and by the Laplace continued
/// fraction of erfc beyond.
pub fn erf(x: f64) -> f64 {
    let a = x.abs();
    let value = if a < 3.0 {
        let mut term = a;
        let mut sum = a;
        let mut n = 0.0;
        loop {
            n += 1.0;
            term *= -a * a / n;
            let contrib = term / (2.0 * n + 1.0);
            sum += contrib;
            if contrib.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        2.0 / PI.sqrt() * sum
    } else {
        // erfc(a) = exp(-a^2)/sqrt(pi) * 1/(a + (1/2)/(a + 1/(a + (3/2)/(a + ...))))
        let mut f = a;
        for k in (1..60).rev() {
            f = a + (k as f64 / 2.0) / f;
        }
        1.0 - (-a * a).exp() / PI.sqrt() / f
    };
    value.copysign(x)
}

pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + erf(x / 2f64.sqrt()))
}

#[derive(Clone, Debug)]
pub enum OracleNorm {
    None,
    Group(usize),
    Layer,
}

pub struct OracleLayer {
    pub cin: usize,
    pub cout: usize,
    pub k: usize,
    pub stride: usize,
    /// `w[o][i][j]`
    pub w: Vec<Vec<Vec<f64>>>,
    pub bias: Option<Vec<f64>>,
    pub norm: OracleNorm,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

/// Nested-loop convolution stack; `x` is `channels x time`.
pub fn conv_stack(input: &[f64], layers: &[OracleLayer], eps: f64) -> Vec<Vec<f64>> {
    let mut x = vec![input.to_vec()];
    for l in layers {
        let n = x[0].len();
        let t_out = (n - l.k) / l.stride + 1;
        let mut y = vec![vec![0.0; t_out]; l.cout];
        for o in 0..l.cout {
            for t in 0..t_out {
                let mut acc = l.bias.as_ref().map_or(0.0, |b| b[o]);
                for i in 0..l.cin {
                    for j in 0..l.k {
                        acc += l.w[o][i][j] * x[i][t * l.stride + j];
                    }
                }
                y[o][t] = acc;
            }
        }
        match l.norm {
            OracleNorm::None => {}
            OracleNorm::Group(g) => {
                let per = l.cout / g;
                for grp in 0..g {
                    let chans = grp * per..(grp + 1) * per;
                    let count = (per * t_out) as f64;
                    let mean: f64 = chans.clone().map(|c| y[c].iter().sum::<f64>()).sum::<f64>() / count;
                    let var: f64 = chans
                        .clone()
                        .map(|c| y[c].iter().map(|v| (v - mean) * (v - mean)).sum::<f64>())
                        .sum::<f64>()
                        / count;
                    for c in chans {
                        for v in y[c].iter_mut() {
                            *v = (*v - mean) / (var + eps).sqrt() * l.gamma[c] + l.beta[c];
                        }
                    }
                }
            }
            OracleNorm::Layer => {
                for t in 0..t_out {
                    let mean: f64 = (0..l.cout).map(|c| y[c][t]).sum::<f64>() / l.cout as f64;
                    let var: f64 = (0..l.cout).map(|c| (y[c][t] - mean).powi(2)).sum::<f64>() / l.cout as f64;
                    for c in 0..l.cout {
                        y[c][t] = (y[c][t] - mean) / (var + eps).sqrt() * l.gamma[c] + l.beta[c];
                    }
                }
            }
        }
        for row in y.iter_mut() {
            for v in row.iter_mut() {
                *v = gelu(*v);
            }
        }
        x = y;
    }
    x
}

pub fn mse(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (ra, rb) in a.iter().zip(b) {
        for (x, y) in ra.iter().zip(rb) {
            sum += (x - y) * (x - y);
            n += 1;
        }
    }
    sum / n as f64
}

/// Scale-invariant SDR via explicit projection onto the reference.
pub fn si_sdr(reference: &[f64], estimate: &[f64]) -> f64 {
    let dot: f64 = reference.iter().zip(estimate).map(|(r, e)| r * e).sum();
    let rr: f64 = reference.iter().map(|r| r * r).sum();
    let target: Vec<f64> = reference.iter().map(|r| dot / rr * r).collect();
    let noise: Vec<f64> = target.iter().zip(estimate).map(|(t, e)| e - t).collect();
    let tt: f64 = target.iter().map(|t| t * t).sum();
    let nn: f64 = noise.iter().map(|n| n * n).sum();
    10.0 * tt.log10() - 10.0 * nn.log10()
}

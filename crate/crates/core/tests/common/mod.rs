//! Reference implementations used as test oracles. Each one is written
//! from the textbook definition, favouring directness over speed, and
//! calls nothing from the crate; window tables are passed in as data.

#![allow(dead_code)]

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use radhar::quality::{FusionMode, ScoreParams};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_image(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(0..=255u8) as f64)
}

/// O(N²) forward DFT, no normalization. `x` shorter than `n` is
/// zero-padded.
pub fn naive_dft(x: &[Complex64], n: usize) -> Vec<Complex64> {
    let twiddle: Vec<Complex64> = (0..n)
        .map(|j| Complex64::from_polar(1.0, -2.0 * PI * j as f64 / n as f64))
        .collect();
    (0..n)
        .map(|k| x.iter().enumerate().map(|(t, &v)| v * twiddle[(k * t) % n]).sum())
        .collect()
}

/// Mean SSIM over every valid window position, each window's weighted
/// statistics computed directly from the 2-D Gaussian weights.
pub fn ssim_oracle(a: &Array2<f64>, b: &Array2<f64>, window: usize, sigma: f64, l: f64) -> f64 {
    let c1 = (0.01 * l).powi(2);
    let c2 = (0.03 * l).powi(2);
    let half = (window as f64 - 1.0) / 2.0;
    let mut w = Array2::from_shape_fn((window, window), |(u, v)| {
        (-((u as f64 - half).powi(2) + (v as f64 - half).powi(2)) / (2.0 * sigma * sigma)).exp()
    });
    let s = w.sum();
    w /= s;
    let (rows, cols) = a.dim();
    let mut total = 0.0;
    let mut count = 0usize;
    for i in 0..=rows - window {
        for j in 0..=cols - window {
            let (mut ma, mut mb) = (0.0, 0.0);
            for u in 0..window {
                for v in 0..window {
                    ma += w[(u, v)] * a[(i + u, j + v)];
                    mb += w[(u, v)] * b[(i + u, j + v)];
                }
            }
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for u in 0..window {
                for v in 0..window {
                    let da = a[(i + u, j + v)] - ma;
                    let db = b[(i + u, j + v)] - mb;
                    va += w[(u, v)] * da * da;
                    vb += w[(u, v)] * db * db;
                    cov += w[(u, v)] * da * db;
                }
            }
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    total / count as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleScore {
    pub s: f64,
    pub lumps_score: f64,
    pub peak_score: f64,
    pub subpeak_count: usize,
    pub leftover_ratio: f64,
}

struct OLump {
    pixels: Vec<(usize, usize)>,
    energy: f64,
    origin: (usize, usize),
}

fn clamp(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.max(0.0).min(1.0)
    }
}

/// The cleanliness score, step by step.
pub fn score_oracle(x: &Array2<f64>, p: &ScoreParams) -> OracleScore {
    let (rows, cols) = x.dim();
    let n = rows * cols;

    // peak score
    let max_x = x.iter().fold(f64::MIN, |m, &v| if v > m { v } else { m });
    let mean = x.iter().sum::<f64>() / n as f64;
    let std = (x.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n as f64).sqrt();
    let denom = std + 1e-9 * max_x;
    let peakness = if denom > 0.0 { ((max_x - mean) / denom).max(0.0) } else { 0.0 };
    let peak_score = clamp(1.0 - (-p.phi * peakness).exp());

    // lumps above the percentile
    let mut lumps = Vec::new();
    if x.iter().any(|&v| v > 0.0) {
        let mut sorted: Vec<f64> = x.iter().copied().collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let rank = p.pct / 100.0 * (n - 1) as f64;
        let lo = rank.floor() as usize;
        let frac = rank - lo as f64;
        let thr = if lo + 1 < n {
            sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac
        } else {
            sorted[lo]
        };
        let above = |r: usize, c: usize| x[(r, c)] > thr;
        let mut label = Array2::<usize>::zeros((rows, cols));
        let mut next = 0;
        for r in 0..rows {
            for c in 0..cols {
                if !above(r, c) || label[(r, c)] != 0 {
                    continue;
                }
                next += 1;
                let mut stack = vec![(r, c)];
                label[(r, c)] = next;
                let mut pixels = Vec::new();
                while let Some((pr, pc)) = stack.pop() {
                    pixels.push((pr, pc));
                    for dr in -1i64..=1 {
                        for dc in -1i64..=1 {
                            let (nr, nc) = (pr as i64 + dr, pc as i64 + dc);
                            if (dr, dc) == (0, 0) || nr < 0 || nc < 0 || nr >= rows as i64 || nc >= cols as i64 {
                                continue;
                            }
                            let (nr, nc) = (nr as usize, nc as usize);
                            if above(nr, nc) && label[(nr, nc)] == 0 {
                                label[(nr, nc)] = next;
                                stack.push((nr, nc));
                            }
                        }
                    }
                }
                pixels.sort();
                let energy = pixels.iter().map(|&q| x[q]).sum();
                let origin = (
                    pixels.iter().map(|q| q.0).min().unwrap(),
                    pixels.iter().map(|q| q.1).min().unwrap(),
                );
                lumps.push(OLump { pixels, energy, origin });
            }
        }
        lumps.sort_by(|a, b| b.energy.partial_cmp(&a.energy).unwrap().then(a.origin.cmp(&b.origin)));
    }
    if lumps.is_empty() {
        return OracleScore {
            s: 0.0,
            lumps_score: 0.0,
            peak_score,
            subpeak_count: 0,
            leftover_ratio: 0.0,
        };
    }

    // energies
    let e_total: f64 = x.iter().sum();
    let e_main = lumps[0].energy;

    // sub-peaks inside valid lumps
    let valid: Vec<&OLump> = lumps.iter().filter(|l| l.energy >= p.valid_lump_fraction * e_main).collect();
    let mut sub = Array2::<f64>::zeros((rows, cols));
    for l in &valid {
        for &q in &l.pixels {
            sub[q] = x[q];
        }
    }
    let max_val = sub.iter().fold(0.0f64, |m, &v| m.max(v));
    let abs_thresh = p.gamma * max_val;
    let mut subpeaks = 0;
    for l in &valid {
        let mut cands = Vec::new();
        for &(r, c) in &l.pixels {
            let v = sub[(r, c)];
            if v < abs_thresh {
                continue;
            }
            let mut is_max = true;
            for nr in r.saturating_sub(1)..=(r + 1).min(rows - 1) {
                for nc in c.saturating_sub(1)..=(c + 1).min(cols - 1) {
                    if (nr, nc) == (r, c) {
                        continue;
                    }
                    let w = sub[(nr, nc)];
                    // plateaus: the raster-first pixel survives
                    if w > v || (w == v && (nr, nc) < (r, c)) {
                        is_max = false;
                    }
                }
            }
            if is_max {
                cands.push((v, (r, c)));
            }
        }
        cands.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        let mut kept: Vec<(usize, usize)> = Vec::new();
        for (_, q) in cands {
            if kept
                .iter()
                .all(|k| (k.0 as i64 - q.0 as i64).abs().max((k.1 as i64 - q.1 as i64).abs()) > p.d_min as i64)
            {
                kept.push(q);
            }
        }
        subpeaks += kept.len();
    }

    // penalties and fusion
    let alpha = if subpeaks <= 1 { p.alpha_single } else { p.alpha_multi };
    let penalty = (alpha * (subpeaks as f64 - 1.0)).max(0.0);
    let leftover = ((e_total - e_main) / e_main).max(0.0);
    let lumps_score = clamp(1.0 / (1.0 + leftover + penalty));
    let s = match p.fusion_mode {
        FusionMode::GeometricProduct => lumps_score.powf(p.w1) * peak_score.powf(p.w2),
        FusionMode::LiteralSum => lumps_score.powf(p.w1) + peak_score.powf(p.w2),
    };
    OracleScore {
        s: clamp(s),
        lumps_score,
        peak_score,
        subpeak_count: subpeaks,
        leftover_ratio: leftover,
    }
}

/// Random RA-like frame: a few Gaussian blobs (some elongated or close
/// together) over a uniform noise floor.
pub fn random_frame(rng: &mut ChaCha8Rng) -> Array2<f64> {
    let rows = rng.random_range(24..64);
    let cols = rng.random_range(24..64);
    let blobs: Vec<(f64, f64, f64, f64, f64)> = (0..rng.random_range(1..5))
        .map(|_| {
            (
                rng.random_range(0.0..rows as f64),
                rng.random_range(0.0..cols as f64),
                rng.random_range(1.0..4.0),
                rng.random_range(1.0..4.0),
                rng.random_range(0.2..2.0),
            )
        })
        .collect();
    let floor = rng.random_range(0.0..0.2);
    Array2::from_shape_fn((rows, cols), |(r, c)| {
        let mut v = floor * rng.random::<f64>();
        for &(cr, cc, sr, sc, a) in &blobs {
            v += a * (-(((r as f64 - cr) / sr).powi(2) + ((c as f64 - cc) / sc).powi(2)) / 2.0).exp();
        }
        v
    })
}

pub fn gaussian_blob(shape: (usize, usize), centre: (f64, f64), sigma: f64, amplitude: f64) -> Array2<f64> {
    Array2::from_shape_fn(shape, |(r, c)| {
        amplitude * (-((r as f64 - centre.0).powi(2) + (c as f64 - centre.1).powi(2)) / (2.0 * sigma * sigma)).exp()
    })
}

/// Entropy in bits of a non-negative weight vector (0·log 0 = 0).
fn entropy_bits(w: &[f64]) -> f64 {
    let total: f64 = w.iter().sum();
    w.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| {
            let p = v / total;
            -p * p.log2()
        })
        .sum()
}

/// Exhaustive search over the EBD candidate intervals, every step computed
/// directly: naive DFTs for the anchor vote and for each STFT frame.
/// Entropies within `1e-9` count as tied and go to the lowest start.
pub fn ebd_oracle(
    map: &Array2<Complex64>,
    width: usize,
    candidates: usize,
    window: &[f64],
    hop: usize,
    nfft: usize,
) -> (usize, f64) {
    let (bins, chirps) = map.dim();
    // anchor: per Doppler column, which range row is strongest; take the mode
    let spectra: Vec<Vec<f64>> = (0..bins)
        .map(|r| {
            let row: Vec<Complex64> = map.row(r).to_vec();
            naive_dft(&row, chirps).iter().map(|z| z.norm()).collect()
        })
        .collect();
    let mut votes = vec![0usize; bins];
    for k in 0..chirps {
        let mut best = None;
        let mut best_v = 0.0;
        for (r, s) in spectra.iter().enumerate() {
            if s[k] > best_v {
                best_v = s[k];
                best = Some(r);
            }
        }
        if let Some(r) = best {
            votes[r] += 1;
        }
    }
    let max_votes = *votes.iter().max().unwrap();
    let anchor = votes.iter().position(|&v| v == max_votes).unwrap();

    let mut starts: Vec<usize> = Vec::new();
    let lo = -(((candidates - 1) / 2) as i64);
    for q in lo..lo + candidates as i64 {
        let s = (anchor as i64 + q - (width / 2) as i64).clamp(0, (bins - width) as i64) as usize;
        if !starts.contains(&s) {
            starts.push(s);
        }
    }
    starts.sort();

    let wlen = window.len();
    let frames = (chirps - wlen) / hop + 1;
    let mut best: Option<(usize, f64)> = None;
    for &s in &starts {
        let signal: Vec<Complex64> = (0..chirps).map(|t| (s..s + width).map(|r| map[(r, t)]).sum()).collect();
        let mut acc = 0.0;
        for f in 0..frames {
            let seg: Vec<Complex64> = (0..wlen).map(|i| signal[f * hop + i] * window[i]).collect();
            let power: Vec<f64> = naive_dft(&seg, nfft).iter().map(|z| z.norm_sqr()).collect();
            acc += if power.iter().any(|&v| v > 0.0) {
                entropy_bits(&power)
            } else {
                (nfft as f64).log2()
            };
        }
        let h = acc / frames as f64;
        match best {
            Some((_, bh)) if h >= bh - 1e-9 => {}
            _ => best = Some((s, h)),
        }
    }
    best.unwrap()
}

/// Steady-state gain of a filter at `freq_hz`, measured by driving it with
/// a complex exponential and averaging `|y|` over the second half.
pub fn measured_gain(filter: impl Fn(&[Complex64]) -> Vec<Complex64>, freq_hz: f64, fs: f64) -> f64 {
    let n = 8192;
    let x: Vec<Complex64> = (0..n)
        .map(|t| Complex64::from_polar(1.0, 2.0 * PI * freq_hz * t as f64 / fs))
        .collect();
    let y = filter(&x);
    y[n / 2..].iter().map(|z| z.norm()).sum::<f64>() / (n / 2) as f64
}

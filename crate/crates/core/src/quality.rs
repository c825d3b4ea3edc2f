//! No-reference cleanliness score for RA maps ("lumps + sub-peak").
//!
//! A frame scores high when its energy is concentrated in a single
//! connected lump with a single peak and that peak stands far above the
//! map's mean. The score fuses a lump-purity term and a peak-prominence
//! term:
//!
//! ```text
//! lumpsScore = clamp(1 / (1 + leftoverRatio + lumpsPenalty))
//! peakScore  = clamp(1 - exp(-φ · peakness))
//! S          = clamp(lumpsScore^w1 · peakScore^w2)    (geometric_product)
//! S          = clamp(lumpsScore^w1 + peakScore^w2)    (literal_sum)
//! ```
//!
//! The literal sum saturates at 1 for almost any pair of sub-scores, so
//! the weighted geometric product is the default.

use std::collections::VecDeque;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ra_map::RaMap;

/// 8-connected region of above-threshold pixels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lump {
    /// Member pixels `(row, col)` in raster order.
    pub pixels: Vec<(usize, usize)>,
    /// Energy-weighted centroid `(row, col)`.
    pub centroid: (f64, f64),
    /// `(row_min, col_min, row_max, col_max)`, inclusive.
    pub bbox: (usize, usize, usize, usize),
    pub energy: f64,
    pub subpeak_count: usize,
}

impl Lump {
    pub fn bbox_origin(&self) -> (usize, usize) {
        (self.bbox.0, self.bbox.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    GeometricProduct,
    LiteralSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScoreParams {
    /// Percentile (0–100) above which pixels join a lump.
    pub pct: f64,
    /// Sub-peak absolute threshold as a fraction of the lump-masked maximum.
    pub gamma: f64,
    /// Minimum Chebyshev separation between sub-peaks, pixels.
    pub d_min: usize,
    /// Sub-peak penalty rate when at most one peak is present.
    pub alpha_single: f64,
    /// Sub-peak penalty rate when several peaks are present.
    pub alpha_multi: f64,
    /// Peakness rate.
    pub phi: f64,
    /// Fusion weights. The tuned pair is (0.25, 0.75); the algorithm
    /// listing elsewhere quotes (0.2, 0.8).
    pub w1: f64,
    pub w2: f64,
    pub fusion_mode: FusionMode,
    /// Lumps below this fraction of the main lump's energy are ignored for
    /// sub-peak counting.
    pub valid_lump_fraction: f64,
}

impl Default for ScoreParams {
    fn default() -> Self {
        Self {
            pct: 90.0,
            gamma: 0.5,
            d_min: 3,
            alpha_single: 3.0,
            alpha_multi: 0.1,
            phi: 0.5,
            w1: 0.25,
            w2: 0.75,
            fusion_mode: FusionMode::GeometricProduct,
            valid_lump_fraction: 0.01,
        }
    }
}

impl ScoreParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=100.0).contains(&self.pct) {
            return Err(Error::invalid(format!("pct must lie in [0, 100], got {}", self.pct)));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::invalid(format!("gamma must lie in (0, 1), got {}", self.gamma)));
        }
        if self.d_min == 0 {
            return Err(Error::invalid("d_min must be at least 1"));
        }
        if !(self.phi > 0.0) {
            return Err(Error::invalid("phi must be positive"));
        }
        if self.alpha_single < 0.0 || self.alpha_multi < 0.0 {
            return Err(Error::invalid("sub-peak penalties must be non-negative"));
        }
        if self.w1 < 0.0 || self.w2 < 0.0 {
            return Err(Error::invalid("fusion weights must be non-negative"));
        }
        if self.fusion_mode == FusionMode::GeometricProduct && (self.w1 + self.w2 - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "geometric_product fusion needs w1 + w2 = 1, got {}",
                self.w1 + self.w2
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameScore {
    #[serde(rename = "S")]
    pub s: f64,
    pub lumps_score: f64,
    pub peak_score: f64,
    pub subpeak_count: usize,
    pub leftover_ratio: f64,
    #[serde(skip)]
    pub lump_inventory: Vec<Lump>,
}

/// Percentile with linear interpolation between closest ranks.
pub fn percentile(values: &[f64], pct: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = pct / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

const NEIGHBOURS: [(isize, isize); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];

fn neighbours(rows: usize, cols: usize, r: usize, c: usize) -> impl Iterator<Item = (usize, usize)> {
    NEIGHBOURS.iter().filter_map(move |&(dr, dc)| {
        let nr = r.checked_add_signed(dr)?;
        let nc = c.checked_add_signed(dc)?;
        (nr < rows && nc < cols).then_some((nr, nc))
    })
}

/// Connected components of `X > percentile(X, pct)`, sorted by energy
/// (descending) then by bounding-box origin.
pub fn lumps_from_frame(frame: &RaMap, pct: f64) -> Vec<Lump> {
    let x = &frame.power;
    if x.is_empty() || !x.iter().any(|&v| v > 0.0) {
        return Vec::new();
    }
    let values: Vec<f64> = x.iter().copied().collect();
    let threshold = percentile(&values, pct);
    let (rows, cols) = x.dim();
    let mut seen = Array2::from_elem((rows, cols), false);
    let mut lumps = Vec::new();
    let mut queue = VecDeque::new();
    for r in 0..rows {
        for c in 0..cols {
            if seen[(r, c)] || !(x[(r, c)] > threshold) {
                continue;
            }
            seen[(r, c)] = true;
            queue.push_back((r, c));
            let mut pixels = Vec::new();
            while let Some((pr, pc)) = queue.pop_front() {
                pixels.push((pr, pc));
                for (nr, nc) in neighbours(rows, cols, pr, pc) {
                    if !seen[(nr, nc)] && x[(nr, nc)] > threshold {
                        seen[(nr, nc)] = true;
                        queue.push_back((nr, nc));
                    }
                }
            }
            pixels.sort_unstable();
            lumps.push(make_lump(x, pixels));
        }
    }
    lumps.sort_by(|a, b| {
        b.energy
            .total_cmp(&a.energy)
            .then_with(|| a.bbox_origin().cmp(&b.bbox_origin()))
    });
    lumps
}

fn make_lump(x: &Array2<f64>, pixels: Vec<(usize, usize)>) -> Lump {
    let (mut energy, mut sr, mut sc) = (0.0, 0.0, 0.0);
    let mut bbox = (usize::MAX, usize::MAX, 0, 0);
    for &(r, c) in &pixels {
        let v = x[(r, c)];
        energy += v;
        sr += v * r as f64;
        sc += v * c as f64;
        bbox = (bbox.0.min(r), bbox.1.min(c), bbox.2.max(r), bbox.3.max(c));
    }
    Lump {
        centroid: (sr / energy, sc / energy),
        pixels,
        bbox,
        energy,
        subpeak_count: 0,
    }
}

/// Sub-peaks per lump, written into each lump's `subpeak_count`; returns the
/// total.
///
/// The search runs on `X` masked to the union of `lumps`. A pixel is a
/// local maximum when it is greater than every 8-neighbour, with equal
/// neighbours resolved in favour of the earlier pixel in raster order so a
/// plateau yields one candidate. Candidates below `gamma · max` are dropped
/// and the rest are thinned greedily by descending value, suppressing any
/// candidate within Chebyshev distance `d_min` of a kept peak.
pub fn count_subpeaks(frame: &RaMap, lumps: &mut [Lump], gamma: f64, d_min: usize) -> usize {
    if lumps.is_empty() {
        return 0;
    }
    let x = &frame.power;
    let (rows, cols) = x.dim();
    let mut sub = Array2::<f64>::zeros((rows, cols));
    for lump in lumps.iter() {
        for &p in &lump.pixels {
            sub[p] = x[p];
        }
    }
    let max_val = sub.iter().cloned().fold(0.0, f64::max);
    let abs_thresh = gamma * max_val;

    let mut total = 0;
    for lump in lumps.iter_mut() {
        let mut candidates: Vec<(f64, (usize, usize))> = lump
            .pixels
            .iter()
            .filter(|&&(r, c)| {
                let v = sub[(r, c)];
                v >= abs_thresh
                    && neighbours(rows, cols, r, c).all(|(nr, nc)| {
                        let w = sub[(nr, nc)];
                        v > w || (v == w && (nr, nc) > (r, c))
                    })
            })
            .map(|&p| (sub[p], p))
            .collect();
        candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
        let mut kept: Vec<(usize, usize)> = Vec::new();
        for (_, p) in candidates {
            let close = kept
                .iter()
                .any(|q| p.0.abs_diff(q.0).max(p.1.abs_diff(q.1)) <= d_min);
            if !close {
                kept.push(p);
            }
        }
        lump.subpeak_count = kept.len();
        total += kept.len();
    }
    total
}

fn clamp01(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

/// Guard added to the std, relative to the frame maximum so the ratio
/// stays invariant under scaling.
pub const PEAKNESS_EPS: f64 = 1e-9;

/// `(max − mean) / (std + ε·max)`, floored at 0; 0 for an all-zero frame.
/// Population std.
pub fn peakness(frame: &RaMap) -> f64 {
    let x = &frame.power;
    let n = x.len() as f64;
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mean = x.sum() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let denom = var.sqrt() + PEAKNESS_EPS * max;
    if denom > 0.0 {
        ((max - mean) / denom).max(0.0)
    } else {
        0.0
    }
}

/// Scores one frame. A frame without any lump scores 0.
pub fn cleanliness_score(frame: &RaMap, params: &ScoreParams) -> Result<FrameScore> {
    params.validate()?;
    if frame.power.is_empty() {
        return Err(Error::invalid("cannot score an empty frame"));
    }
    let mut lumps = lumps_from_frame(frame, params.pct);
    let peak_score = clamp01(1.0 - (-params.phi * peakness(frame)).exp());
    if lumps.is_empty() {
        return Ok(FrameScore {
            s: 0.0,
            lumps_score: 0.0,
            peak_score,
            subpeak_count: 0,
            leftover_ratio: 0.0,
            lump_inventory: lumps,
        });
    }

    let e_total = frame.power.sum();
    let e_main = lumps[0].energy;
    let valid = lumps
        .iter()
        .take_while(|l| l.energy >= params.valid_lump_fraction * e_main)
        .count();
    let subpeak_count = count_subpeaks(frame, &mut lumps[..valid], params.gamma, params.d_min);

    let alpha = if subpeak_count <= 1 { params.alpha_single } else { params.alpha_multi };
    let lumps_penalty = (alpha * (subpeak_count as f64 - 1.0)).max(0.0);
    let leftover_ratio = ((e_total - e_main) / e_main).max(0.0);
    let lumps_score = clamp01(1.0 / (1.0 + leftover_ratio + lumps_penalty));

    let s = match params.fusion_mode {
        FusionMode::GeometricProduct => lumps_score.powf(params.w1) * peak_score.powf(params.w2),
        FusionMode::LiteralSum => lumps_score.powf(params.w1) + peak_score.powf(params.w2),
    };
    Ok(FrameScore {
        s: clamp01(s),
        lumps_score,
        peak_score,
        subpeak_count,
        leftover_ratio,
        lump_inventory: lumps,
    })
}

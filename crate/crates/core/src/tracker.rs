//! Single-target lump tracking across RA frames, plus soft/hard masks.
//!
//! Per frame: a frame whose cleanliness score reaches `tau` hands its
//! strongest lump to the track directly. Otherwise the strongest lump
//! within `gate_distance_px` of the previous centroid is taken. With no
//! such lump the track coasts on its last centroid; after more than
//! `window_frames` consecutive coasting frames it is dropped and stays
//! empty until some frame passes the score gate again.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quality::{cleanliness_score, Lump, ScoreParams};
use crate::ra_map::RaMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateMetric {
    Euclidean,
    /// Per-axis bound: both |Δrow| and |Δcol| within the gate.
    PerAxis,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackerParams {
    pub tau: f64,
    /// Gate radius in map pixels.
    pub gate_distance_px: f64,
    pub window_frames: usize,
    pub gate_metric: GateMetric,
}

impl Default for TrackerParams {
    fn default() -> Self {
        Self {
            tau: 0.8,
            gate_distance_px: 30.0,
            window_frames: 5,
            gate_metric: GateMetric::Euclidean,
        }
    }
}

impl TrackerParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::invalid(format!("tau must lie in [0, 1], got {}", self.tau)));
        }
        if !(self.gate_distance_px > 0.0) {
            return Err(Error::invalid("gate distance must be positive"));
        }
        if self.window_frames == 0 {
            return Err(Error::invalid("window must span at least one frame"));
        }
        Ok(())
    }

    fn within_gate(&self, a: (f64, f64), b: (f64, f64)) -> bool {
        match self.gate_metric {
            GateMetric::Euclidean => distance(a, b) <= self.gate_distance_px,
            GateMetric::PerAxis => {
                (a.0 - b.0).abs() <= self.gate_distance_px && (a.1 - b.1).abs() <= self.gate_distance_px
            }
        }
    }
}

pub fn distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// How a frame's track position was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackMode {
    /// Frame score reached `tau`.
    Accepted,
    /// Nearest-centroid gating against the previous position.
    Gated,
    /// No acceptable lump; position held from history.
    Coasting,
    /// First frame below `tau`; its strongest lump seeds the track.
    Bootstrap,
    /// No track position.
    Lost,
}

impl TrackMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TrackMode::Accepted => "accepted",
            TrackMode::Gated => "gated",
            TrackMode::Coasting => "coasting",
            TrackMode::Bootstrap => "bootstrap",
            TrackMode::Lost => "lost",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackState {
    pub frame_index: usize,
    pub chosen_lump: Option<Lump>,
    pub centroid: Option<(f64, f64)>,
    pub mode: TrackMode,
    pub score: f64,
    /// Every lump detected in the frame, strongest first.
    pub lumps: Vec<Lump>,
}

impl TrackState {
    pub fn accepted_by_score(&self) -> bool {
        self.mode == TrackMode::Accepted
    }

    pub fn gated(&self) -> bool {
        self.mode == TrackMode::Gated
    }

    pub fn coasting(&self) -> bool {
        self.mode == TrackMode::Coasting
    }
}

pub fn track_sequence(
    frames: &[RaMap],
    params: &TrackerParams,
    score_params: &ScoreParams,
) -> Result<Vec<TrackState>> {
    if frames.is_empty() {
        return Err(Error::invalid("tracking needs at least one frame"));
    }
    params.validate()?;
    let mut states = Vec::with_capacity(frames.len());
    let mut position: Option<(f64, f64)> = None;
    let mut coasting_run = 0;

    for (t, frame) in frames.iter().enumerate() {
        let score = cleanliness_score(frame, score_params)?;
        let lumps = score.lump_inventory;
        let (mode, chosen) = if score.s >= params.tau && !lumps.is_empty() {
            (TrackMode::Accepted, Some(lumps[0].clone()))
        } else if let Some(prev) = position {
            // only lumps the scorer counts as valid are candidates; sorted by
            // energy, so the first hit has maximal energy
            let floor = score_params.valid_lump_fraction * lumps.first().map_or(0.0, |l| l.energy);
            match lumps
                .iter()
                .take_while(|l| l.energy >= floor)
                .find(|l| params.within_gate(l.centroid, prev))
            {
                Some(l) => (TrackMode::Gated, Some(l.clone())),
                None if coasting_run < params.window_frames => (TrackMode::Coasting, None),
                None => (TrackMode::Lost, None),
            }
        } else if t == 0 && !lumps.is_empty() {
            (TrackMode::Bootstrap, Some(lumps[0].clone()))
        } else {
            (TrackMode::Lost, None)
        };

        match mode {
            TrackMode::Coasting => coasting_run += 1,
            TrackMode::Lost => {
                coasting_run = 0;
                position = None;
            }
            _ => {
                coasting_run = 0;
                position = chosen.as_ref().map(|l| l.centroid);
            }
        }
        states.push(TrackState {
            frame_index: t,
            centroid: position,
            chosen_lump: chosen,
            mode,
            score: score.s,
            lumps,
        });
    }
    Ok(states)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskKind {
    Soft,
    Hard,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub weights: Array2<f64>,
    pub kind: MaskKind,
}

/// Radial Gaussian weights `exp(-d² / 2r²)` around the pixel containing
/// the centroid, so that pixel carries weight exactly 1.
pub fn soft_mask(shape: (usize, usize), centroid: (f64, f64), decay_radius_px: f64) -> Result<Mask> {
    let (rows, cols) = shape;
    let (r0, c0) = centroid;
    if !(r0 >= 0.0 && c0 >= 0.0 && r0 <= (rows as f64 - 1.0) && c0 <= (cols as f64 - 1.0)) {
        return Err(Error::invalid(format!(
            "centroid ({r0:.2}, {c0:.2}) outside a {rows}×{cols} map"
        )));
    }
    if !(decay_radius_px > 0.0) {
        return Err(Error::invalid("decay radius must be positive"));
    }
    let (pr, pc) = (r0.round(), c0.round());
    let inv = 1.0 / (2.0 * decay_radius_px * decay_radius_px);
    let weights = Array2::from_shape_fn(shape, |(r, c)| {
        let d2 = (r as f64 - pr).powi(2) + (c as f64 - pc).powi(2);
        (-d2 * inv).exp()
    });
    Ok(Mask {
        weights,
        kind: MaskKind::Soft,
    })
}

/// Ones inside `bbox` (inclusive `(row_min, col_min, row_max, col_max)`)
/// dilated by `margin_px`, clipped to the map; zeros elsewhere.
pub fn hard_mask(shape: (usize, usize), bbox: (usize, usize, usize, usize), margin_px: usize) -> Result<Mask> {
    let (rows, cols) = shape;
    let (r0, c0, r1, c1) = bbox;
    if r1 < r0 || c1 < c0 {
        return Err(Error::invalid(format!("empty bounding box {bbox:?}")));
    }
    if r0 >= rows || c0 >= cols {
        return Err(Error::invalid(format!("bounding box {bbox:?} outside a {rows}×{cols} map")));
    }
    let (lr, lc) = (r0.saturating_sub(margin_px), c0.saturating_sub(margin_px));
    let (hr, hc) = ((r1 + margin_px).min(rows - 1), (c1 + margin_px).min(cols - 1));
    let weights = Array2::from_shape_fn(shape, |(r, c)| {
        if (lr..=hr).contains(&r) && (lc..=hc).contains(&c) {
            1.0
        } else {
            0.0
        }
    });
    Ok(Mask {
        weights,
        kind: MaskKind::Hard,
    })
}

pub fn apply_mask(frame: &RaMap, mask: &Mask) -> Result<RaMap> {
    if frame.power.dim() != mask.weights.dim() {
        return Err(Error::invalid(format!(
            "mask shape {:?} differs from map shape {:?}",
            mask.weights.dim(),
            frame.power.dim()
        )));
    }
    Ok(RaMap {
        power: &frame.power * &mask.weights,
        ..frame.clone()
    })
}

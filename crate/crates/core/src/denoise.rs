//! Spectrogram denoising: iterative adaptive thresholding (ATh),
//! adaptive-resolution preprocessing (APr), entropy-based denoising (EBD)
//! and the APr → ATh composition.

use ndarray::{Array2, Axis};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dsp::{dft_slice, shannon_entropy, stft, StftParams};
use crate::error::{Error, Result};
use crate::spectrogram::{slow_time_from_rows, to_gray, GrayImage, Spectrogram};

pub const ATH_MAX_ITERATIONS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct AThResult {
    pub threshold: f64,
    pub iterations: usize,
    pub converged: bool,
    pub mask: Array2<bool>,
    pub masked_image: GrayImage,
}

/// Two-class mean (isodata) threshold iteration starting from the global
/// mean. An empty class contributes the current threshold, so a constant
/// image converges immediately with an empty mask.
pub fn ath_threshold(img: &GrayImage, tol: f64) -> Result<AThResult> {
    if img.pixels.is_empty() {
        return Err(Error::invalid("ATh needs a non-empty image"));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("ATh tolerance must be positive"));
    }
    // 256-bin histogram keeps each iteration O(256).
    let mut hist = [0u64; 256];
    for &p in img.pixels.iter() {
        hist[p as usize] += 1;
    }
    let n = img.pixels.len() as f64;
    let total: f64 = hist.iter().enumerate().map(|(v, &c)| v as f64 * c as f64).sum();

    let mut t = total / n;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < ATH_MAX_ITERATIONS {
        iterations += 1;
        let (mut lo_sum, mut lo_n, mut hi_sum, mut hi_n) = (0.0, 0.0, 0.0, 0.0);
        for (v, &c) in hist.iter().enumerate() {
            let (v, c) = (v as f64, c as f64);
            if v > t {
                hi_sum += v * c;
                hi_n += c;
            } else {
                lo_sum += v * c;
                lo_n += c;
            }
        }
        let hi = if hi_n > 0.0 { hi_sum / hi_n } else { t };
        let lo = if lo_n > 0.0 { lo_sum / lo_n } else { t };
        let next = (hi + lo) / 2.0;
        let delta = (next - t).abs();
        t = next;
        if delta < tol {
            converged = true;
            break;
        }
    }
    let mask = img.pixels.mapv(|p| f64::from(p) > t);
    let mut masked = img.clone();
    masked
        .pixels
        .zip_mut_with(&mask, |p, &keep| if !keep { *p = 0 });
    Ok(AThResult {
        threshold: t,
        iterations,
        converged,
        mask,
        masked_image: masked,
    })
}

/// Symmetric band about DC holding a target share of the energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActiveBand {
    pub low_bin: usize,
    pub high_bin: usize,
    pub energy_fraction: f64,
}

/// Smallest band `[dc - h, dc + h]` (clipped to the axis) whose marginal
/// energy reaches `energy_fraction` of the total. Marginal energy per bin is
/// the mean square across frames.
pub fn active_band(spec: &Spectrogram, energy_fraction: f64) -> Result<ActiveBand> {
    if !(energy_fraction > 0.0 && energy_fraction <= 1.0) {
        return Err(Error::invalid("energy fraction must lie in (0, 1]"));
    }
    let marginal: Vec<f64> = spec
        .values
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64)
        .collect();
    let total: f64 = marginal.iter().sum();
    if !(total > 0.0) {
        return Err(Error::invalid("APr needs a non-zero spectrogram"));
    }
    let n = marginal.len();
    let dc = n / 2;
    let mut h = 0;
    loop {
        let lo = dc.saturating_sub(h);
        let hi = (dc + h).min(n - 1);
        let captured: f64 = marginal[lo..=hi].iter().sum();
        // the relative slack absorbs summation-order rounding at fraction 1
        if captured >= energy_fraction * total * (1.0 - 1e-12) || (lo == 0 && hi == n - 1) {
            return Ok(ActiveBand {
                low_bin: lo,
                high_bin: hi,
                energy_fraction: (captured / total).min(1.0),
            });
        }
        h += 1;
    }
}

/// `u ↦ sign(u)·ln(1 + γ|u|) / ln(1 + γ)` on `[-1, 1]`.
pub fn log_remap(u: f64, gamma: f64) -> f64 {
    u.signum() * (gamma * u.abs()).ln_1p() / gamma.ln_1p()
}

/// Inverse of [`log_remap`].
pub fn inverse_log_remap(v: f64, gamma: f64) -> f64 {
    v.signum() * ((v.abs() * gamma.ln_1p()).exp() - 1.0) / gamma
}

pub const DEFAULT_APR_GAMMA: f64 = 9.0;

/// Adaptive-resolution remap: the active band is stretched onto the full
/// frequency axis through a logarithmic coordinate warp that allots more
/// output rows per input bin near DC. Values are resampled by linear
/// interpolation, then each frame is rescaled to keep its energy.
pub fn apr_transform(spec: &Spectrogram, energy_fraction: f64, gamma: f64) -> Result<Spectrogram> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::invalid("APr gamma must be positive"));
    }
    let band = active_band(spec, energy_fraction)?;
    let n = spec.doppler_bins();
    let dc = n / 2;
    let half_pos_in = (band.high_bin - dc) as f64;
    let half_neg_in = (dc - band.low_bin) as f64;
    let half_pos_out = (n - 1 - dc) as f64;
    let half_neg_out = dc as f64;

    // fractional input row for each output row
    let source: Vec<f64> = (0..n)
        .map(|i| {
            if i > dc {
                let u = (i - dc) as f64 / half_pos_out;
                dc as f64 + inverse_log_remap(u, gamma) * half_pos_in
            } else if i < dc {
                let u = (dc - i) as f64 / half_neg_out;
                dc as f64 - inverse_log_remap(u, gamma) * half_neg_in
            } else {
                dc as f64
            }
        })
        .collect();

    let mut out = Array2::zeros(spec.values.dim());
    for (t, col) in spec.values.axis_iter(Axis(1)).enumerate() {
        let mut out_col = out.column_mut(t);
        for (dst, &pos) in out_col.iter_mut().zip(&source) {
            let lo = pos.floor().clamp(0.0, (n - 1) as f64) as usize;
            let hi = (lo + 1).min(n - 1);
            let frac = pos - lo as f64;
            *dst = col[lo] * (1.0 - frac) + col[hi] * frac;
        }
        let e_in: f64 = col.iter().map(|v| v * v).sum();
        let e_out: f64 = out_col.iter().map(|v| v * v).sum();
        if e_out > 0.0 {
            let scale = (e_in / e_out).sqrt();
            out_col.iter_mut().for_each(|v| *v *= scale);
        }
    }
    Spectrogram::new(out, spec.frame_hop_s, spec.bin_hz)
}

/// Range interval chosen by minimum average spectral entropy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EbdInterval {
    pub start_bin: usize,
    pub width_bins: usize,
    pub avg_entropy_bits: f64,
}

impl EbdInterval {
    pub fn contains(&self, bin: usize) -> bool {
        bin >= self.start_bin && bin < self.start_bin + self.width_bins
    }
}

/// Range bin most often holding the strongest return: every range row is
/// transformed across slow time, each non-empty Doppler column votes for
/// its peak range bin, and the mode wins (lowest bin on ties).
pub fn ebd_anchor(range_time: &Array2<Complex64>) -> Result<usize> {
    let (bins, chirps) = range_time.dim();
    if bins < 2 || chirps == 0 {
        return Err(Error::invalid(format!(
            "EBD needs at least 2 range bins and one chirp, got {bins}×{chirps}"
        )));
    }
    let mut rd = Array2::<f64>::zeros((bins, chirps));
    for (r, row) in range_time.rows().into_iter().enumerate() {
        let spectrum = dft_slice(&row.to_vec(), chirps)?;
        rd.row_mut(r)
            .iter_mut()
            .zip(&spectrum)
            .for_each(|(d, z)| *d = z.norm());
    }
    let mut votes = vec![0usize; bins];
    for col in rd.columns() {
        let (best, peak) = col
            .iter()
            .enumerate()
            .fold((0, 0.0), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        if peak > 0.0 {
            votes[best] += 1;
        }
    }
    let (anchor, _) = votes
        .iter()
        .enumerate()
        .fold((0, 0), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    Ok(anchor)
}

/// Start bins of the candidate intervals: `candidates` centres spread
/// around the anchor, each interval clipped into `[0, range_bins)`.
/// Duplicate starts produced by clipping are dropped.
pub fn ebd_candidates(anchor: usize, width: usize, candidates: usize, range_bins: usize) -> Result<Vec<usize>> {
    if candidates == 0 {
        return Err(Error::invalid("EBD needs at least one candidate interval"));
    }
    if width == 0 || width > range_bins {
        return Err(Error::invalid(format!(
            "interval width {width} does not fit {range_bins} range bins"
        )));
    }
    let first = -(((candidates - 1) / 2) as i64);
    let max_start = (range_bins - width) as i64;
    let mut starts: Vec<usize> = (0..candidates as i64)
        .map(|q| {
            let centre = anchor as i64 + first + q;
            (centre - (width / 2) as i64).clamp(0, max_start) as usize
        })
        .collect();
    starts.dedup();
    Ok(starts)
}

/// Mean over STFT frames of the Shannon entropy of each frame's power
/// spectrum. Frames with no energy count as maximally uncertain.
pub fn interval_entropy(
    range_time: &Array2<Complex64>,
    start: usize,
    width: usize,
    chirp_rate_hz: f64,
    stft_params: &StftParams,
) -> Result<f64> {
    let signal = slow_time_from_rows(range_time, start, width, chirp_rate_hz)?;
    let z = stft(&signal, stft_params)?;
    let max_bits = (z.ncols() as f64).log2();
    let mut acc = 0.0;
    for frame in z.rows() {
        let power: Vec<f64> = frame.iter().map(|v| v.norm_sqr()).collect();
        acc += if power.iter().any(|&p| p > 0.0) {
            shannon_entropy(&power)?
        } else {
            max_bits
        };
    }
    Ok(acc / z.nrows() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EbdParams {
    pub interval_width: usize,
    pub candidates: usize,
    pub beta: f64,
    pub stft: StftParams,
}

impl Default for EbdParams {
    fn default() -> Self {
        Self {
            interval_width: 5,
            candidates: 7,
            beta: 1.5,
            stft: StftParams::gaussian(),
        }
    }
}

/// Entropies closer than this are treated as equal. Candidates holding the
/// same coherent return differ only by rounding.
pub const EBD_TIE_BITS: f64 = 1e-9;

/// Selects the candidate interval with the lowest average entropy; ties
/// (within [`EBD_TIE_BITS`]) go to the lowest start bin.
pub fn ebd_select_interval(
    range_time: &Array2<Complex64>,
    chirp_rate_hz: f64,
    interval_width: usize,
    candidates: usize,
    stft_params: &StftParams,
) -> Result<EbdInterval> {
    let anchor = ebd_anchor(range_time)?;
    let starts = ebd_candidates(anchor, interval_width, candidates, range_time.nrows())?;
    let mut best: Option<EbdInterval> = None;
    for start in starts {
        let h = interval_entropy(range_time, start, interval_width, chirp_rate_hz, stft_params)?;
        let better = match &best {
            None => true,
            Some(b) => {
                h < b.avg_entropy_bits - EBD_TIE_BITS
                    || ((h - b.avg_entropy_bits).abs() <= EBD_TIE_BITS && start < b.start_bin)
            }
        };
        if better {
            best = Some(EbdInterval {
                start_bin: start,
                width_bins: interval_width,
                avg_entropy_bits: h,
            });
        }
    }
    Ok(best.expect("at least one candidate"))
}

/// Per-frame cut at `beta × mean(frame)`; values below the cut are zeroed.
pub fn ebd_denoise(spec: &Spectrogram, beta: f64) -> Result<Spectrogram> {
    if !(beta >= 0.0) {
        return Err(Error::invalid(format!("EBD beta must be ≥ 0, got {beta}")));
    }
    let mut out = spec.values.clone();
    for mut col in out.axis_iter_mut(Axis(1)) {
        let threshold = beta * col.mean().unwrap_or(0.0);
        col.iter_mut().for_each(|v| {
            if *v < threshold {
                *v = 0.0
            }
        });
    }
    Spectrogram::new(out, spec.frame_hop_s, spec.bin_hz)
}

/// Methods compared by the dynamic evaluation, in report column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "none")]
    None,
    #[serde(rename = "ebd")]
    Ebd,
    #[serde(rename = "ath")]
    Ath,
    #[serde(rename = "apr")]
    Apr,
    #[serde(rename = "apr+ath")]
    AprThenAth,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::None, Method::Ebd, Method::Ath, Method::Apr, Method::AprThenAth];

    /// Column label used in reports.
    pub fn label(self) -> &'static str {
        match self {
            Method::None => "NS",
            Method::Ebd => "EBD",
            Method::Ath => "ATh",
            Method::Apr => "APr",
            Method::AprThenAth => "APr+ATh",
        }
    }

    /// File-name friendly identifier.
    pub fn slug(self) -> &'static str {
        match self {
            Method::None => "ns",
            Method::Ebd => "ebd",
            Method::Ath => "ath",
            Method::Apr => "apr",
            Method::AprThenAth => "apr_ath",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DenoiseParams {
    pub dynamic_range_db: f64,
    pub ath_tol: f64,
    pub apr_energy_fraction: f64,
    pub apr_gamma: f64,
    pub ebd_beta: f64,
}

impl Default for DenoiseParams {
    fn default() -> Self {
        Self {
            dynamic_range_db: crate::spectrogram::DEFAULT_DYNAMIC_RANGE_DB,
            ath_tol: 0.1,
            apr_energy_fraction: 0.99,
            apr_gamma: DEFAULT_APR_GAMMA,
            ebd_beta: 1.5,
        }
    }
}

/// Applies one method to a spectrogram and renders the grayscale result.
pub fn denoise_pipeline(spec: &Spectrogram, method: Method, params: &DenoiseParams) -> Result<GrayImage> {
    let dr = params.dynamic_range_db;
    match method {
        Method::None => to_gray(spec, dr),
        Method::Ath => Ok(ath_threshold(&to_gray(spec, dr)?, params.ath_tol)?.masked_image),
        Method::Apr => to_gray(&apr_transform(spec, params.apr_energy_fraction, params.apr_gamma)?, dr),
        Method::Ebd => to_gray(&ebd_denoise(spec, params.ebd_beta)?, dr),
        Method::AprThenAth => {
            let warped = apr_transform(spec, params.apr_energy_fraction, params.apr_gamma)?;
            Ok(ath_threshold(&to_gray(&warped, dr)?, params.ath_tol)?.masked_image)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn gray(pixels: Array2<u8>) -> GrayImage {
        GrayImage::from_pixels(pixels)
    }

    #[test]
    fn ath_two_level_image() {
        let px = Array2::from_shape_fn((8, 8), |(r, c)| if (r + c) % 2 == 0 { 255 } else { 0 });
        let res = ath_threshold(&gray(px.clone()), 0.1).unwrap();
        assert!((res.threshold - 127.5).abs() <= 0.1);
        assert!(res.converged);
        for (m, p) in res.mask.iter().zip(px.iter()) {
            assert_eq!(*m, *p == 255);
        }
    }

    #[test]
    fn ath_constant_image() {
        let res = ath_threshold(&gray(Array2::from_elem((5, 7), 42)), 0.1).unwrap();
        assert_eq!(res.iterations, 1);
        assert_eq!(res.threshold, 42.0);
        assert!(res.mask.iter().all(|m| !m));
        assert!(res.masked_image.pixels.iter().all(|&p| p == 0));
    }

    #[test]
    fn ath_ninety_ten_split() {
        // Hand iteration: T0 = 0.9·10 + 0.1·200 = 29; classes {10}, {200} -> T1 = 105;
        // same classes -> T2 = 105, converged.
        let px = Array2::from_shape_fn((10, 10), |(r, _)| if r == 0 { 200 } else { 10 });
        let res = ath_threshold(&gray(px.clone()), 0.1).unwrap();
        assert!((res.threshold - 105.0).abs() < 1e-12);
        assert_eq!(res.iterations, 2);
        for (m, p) in res.mask.iter().zip(px.iter()) {
            assert_eq!(*m, *p == 200);
        }
    }

    #[test]
    fn ath_masked_image_matches_mask() {
        let px = Array2::from_shape_fn((6, 6), |(r, c)| ((r * 37 + c * 11) % 256) as u8);
        let res = ath_threshold(&gray(px.clone()), 0.1).unwrap();
        for ((m, p), q) in res.mask.iter().zip(px.iter()).zip(res.masked_image.pixels.iter()) {
            assert_eq!(*q, if *m { *p } else { 0 });
        }
    }

    fn spec_from(values: Array2<f64>) -> Spectrogram {
        Spectrogram::new(values, 0.01, 1.0).unwrap()
    }

    #[test]
    fn active_band_of_central_energy() {
        let n = 64;
        let values = Array2::from_shape_fn((n, 10), |(r, _)| if (28..=36).contains(&r) { 1.0 } else { 0.0 });
        let band = active_band(&spec_from(values), 0.99).unwrap();
        assert_eq!((band.low_bin, band.high_bin), (28, 36));
        assert!((band.energy_fraction - 1.0).abs() < 1e-12);
    }

    #[test]
    fn apr_full_band_keeps_dc_at_centre() {
        let n = 33;
        let values = Array2::from_shape_fn((n, 4), |(r, _)| 1.0 + (r as f64 - 16.0).abs());
        let out = apr_transform(&spec_from(values.clone()), 1.0, 9.0).unwrap();
        // DC row reads DC input; its relative level survives the per-frame rescale
        let ratio_in = values[(16, 0)] / values[(0, 0)];
        let ratio_out = out.values[(16, 0)] / out.values[(0, 0)];
        assert!((ratio_in - ratio_out).abs() < 1e-12);
    }

    #[test]
    fn log_remap_round_trip_and_monotone() {
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=200 {
            let u = -1.0 + i as f64 / 100.0;
            let v = log_remap(u, 9.0);
            assert!(v > prev);
            prev = v;
            assert!((inverse_log_remap(v, 9.0) - u).abs() < 1e-12);
        }
        assert_eq!(log_remap(1.0, 9.0), 1.0);
        assert_eq!(log_remap(0.0, 9.0), 0.0);
    }

    #[test]
    fn apr_rejects_zero() {
        assert!(apr_transform(&spec_from(Array2::zeros((8, 8))), 0.99, 9.0).is_err());
    }

    #[test]
    fn ebd_denoise_cases() {
        let values = Array2::from_shape_fn((16, 3), |(r, c)| if r == 5 + c { 10.0 } else { 1.0 });
        let s = spec_from(values.clone());
        assert_eq!(ebd_denoise(&s, 0.0).unwrap().values, values);
        let out = ebd_denoise(&s, 2.0).unwrap();
        for ((r, c), v) in out.values.indexed_iter() {
            assert_eq!(*v, if r == 5 + c { 10.0 } else { 0.0 });
        }
        assert!(ebd_denoise(&s, 1e9).unwrap().values.iter().all(|v| *v == 0.0));
        assert!(ebd_denoise(&s, -1.0).is_err());
    }

    #[test]
    fn candidates_clip_and_dedupe() {
        assert_eq!(ebd_candidates(10, 5, 7, 32).unwrap(), vec![5, 6, 7, 8, 9, 10, 11]);
        assert_eq!(ebd_candidates(0, 5, 7, 32).unwrap(), vec![0, 1]);
        assert_eq!(ebd_candidates(4, 3, 1, 8).unwrap(), vec![3]);
        assert!(ebd_candidates(4, 9, 1, 8).is_err());
        assert!(ebd_candidates(4, 3, 0, 8).is_err());
    }

    #[test]
    fn ebd_rejects_single_bin_map() {
        let m = Array2::from_elem((1, 64), Complex64::new(1.0, 0.0));
        assert!(ebd_select_interval(&m, 1000.0, 1, 1, &StftParams::gaussian()).is_err());
    }

    #[test]
    fn method_labels_in_table_order() {
        let labels: Vec<_> = Method::ALL.iter().map(|m| m.label()).collect();
        assert_eq!(labels, ["NS", "EBD", "ATh", "APr", "APr+ATh"]);
    }
}

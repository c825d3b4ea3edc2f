//! The two batch experiments and the per-stage helpers the CLI exposes.
//!
//! Output files (dynamic):
//!
//! ```text
//! metrics.csv           snr_db,method,mse,mae,rmse,psnr_db,pearson,ssim
//! metrics.csv.json      sidecar
//! table.txt             per-SNR blocks, one row per metric, one column per method
//! reference.pgm         clean NS spectrogram
//! snr_<tag>_<method>.pgm
//! grid_snr_<tag>.pgm    reference + methods, three per row
//! MANIFEST              completed stages, one per line
//! ```
//!
//! Output files (static):
//!
//! ```text
//! scores.csv            frame_index,S,lumps_score,peak_score,subpeak_count,leftover_ratio
//! track.csv             frame,centroid_row,centroid_col,mode,score
//! ra_frames.rdt         frame × range × angle, f32
//! soft_masks.rdt, hard_masks.rdt
//! overlay_<t>.ppm       chosen lump red, others blue
//! masks_<t>.ppm         raw | bbox | soft | hard
//! MANIFEST
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ndarray::{Array2, Array3, Axis};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::denoise::{denoise_pipeline, ebd_anchor, ebd_select_interval, Method};
use crate::dsp::{butterworth4_lowpass_complex, default_lowpass_cutoff, ComplexSignal};
use crate::error::{Error, Result};
use crate::io::{self, AxisDescriptor, SidecarMeta, Tensor};
use crate::metrics::{MetricReport, Psnr};
use crate::quality::{cleanliness_score, FrameScore, ScoreParams};
use crate::ra_map::{build_ra_frames, RaMap};
use crate::render;
use crate::spectrogram::{add_wgn_cube, md_spectrogram, range_time_profiles, slow_time_from_rows, to_gray, GrayImage};
use crate::synth::{simulate_dynamic_scene, simulate_static_frames, synth_blob_sequence};
use crate::tracker::{hard_mask, soft_mask, track_sequence, TrackMode, TrackState, TrackerParams};

/// Independent sub-seed for stream `index` of a run.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs `f` on a pool of `jobs` threads (all cores when `None`).
pub fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        b = b.num_threads(n);
    }
    let pool = b.build().map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Completed-stage list, rewritten after every stage so a failed run still
/// says how far it got.
pub struct Manifest {
    path: PathBuf,
    stages: Vec<String>,
}

impl Manifest {
    pub fn create(out_dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(out_dir)?;
        let m = Self {
            path: out_dir.join("MANIFEST"),
            stages: Vec::new(),
        };
        m.flush()?;
        Ok(m)
    }

    pub fn complete(&mut self, stage: &str) -> Result<()> {
        self.stages.push(stage.to_string());
        self.flush()
    }

    pub fn stages(&self) -> &[String] {
        &self.stages
    }

    fn flush(&self) -> Result<()> {
        let mut s = String::new();
        for st in &self.stages {
            s.push_str(st);
            s.push('\n');
        }
        io::atomic_write(&self.path, s.as_bytes())
    }
}

/// `10` -> `p10`, `-5` -> `m5`, `2.5` -> `p2_5`.
pub fn snr_tag(snr_db: f64) -> String {
    let sign = if snr_db < 0.0 { 'm' } else { 'p' };
    format!("{sign}{}", snr_db.abs()).replace('.', "_")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DynamicRow {
    pub snr_db: f64,
    pub method: &'static str,
    pub mse: f64,
    pub mae: f64,
    pub rmse: f64,
    pub psnr_db: Psnr,
    pub pearson: Option<f64>,
    pub ssim: f64,
}

#[derive(Debug, Clone)]
pub struct DynamicCell {
    pub snr_db: f64,
    pub method: Method,
    pub image: GrayImage,
    pub metrics: MetricReport,
}

#[derive(Debug, Clone)]
pub struct DynamicResult {
    pub reference: GrayImage,
    /// SNR-major, methods in config order.
    pub cells: Vec<DynamicCell>,
}

impl DynamicResult {
    pub fn rows(&self) -> Vec<DynamicRow> {
        self.cells
            .iter()
            .map(|c| DynamicRow {
                snr_db: c.snr_db,
                method: c.method.label(),
                mse: c.metrics.mse,
                mae: c.metrics.mae,
                rmse: c.metrics.rmse,
                psnr_db: c.metrics.psnr_db,
                pearson: c.metrics.pearson,
                ssim: c.metrics.ssim,
            })
            .collect()
    }

    /// Aligned text table: one block per SNR, metrics down, methods across.
    pub fn table(&self, methods: &[Method]) -> String {
        let mut out = String::new();
        let mut snrs: Vec<f64> = Vec::new();
        for c in &self.cells {
            if !snrs.contains(&c.snr_db) {
                snrs.push(c.snr_db);
            }
        }
        for snr in snrs {
            let _ = writeln!(out, "SNR {snr} dB");
            let _ = write!(out, "{:<8}", "metric");
            for m in methods {
                let _ = write!(out, "{:>12}", m.label());
            }
            out.push('\n');
            let row = |name: &str, f: &dyn Fn(&MetricReport) -> String, out: &mut String| {
                let _ = write!(out, "{name:<8}");
                for m in methods {
                    let cell = self
                        .cells
                        .iter()
                        .find(|c| c.snr_db == snr && c.method == *m)
                        .map(|c| f(&c.metrics))
                        .unwrap_or_default();
                    let _ = write!(out, "{cell:>12}");
                }
                out.push('\n');
            };
            row("MSE", &|r| format!("{:.2}", r.mse), &mut out);
            row("MAE", &|r| format!("{:.2}", r.mae), &mut out);
            row("RMSE", &|r| format!("{:.2}", r.rmse), &mut out);
            row(
                "PSNR",
                &|r| match r.psnr_db {
                    Psnr::Finite(v) => format!("{v:.2}"),
                    Psnr::Infinite => "inf".into(),
                },
                &mut out,
            );
            row(
                "Pearson",
                &|r| r.pearson.map_or("n/a".into(), |v| format!("{v:.3}")),
                &mut out,
            );
            row("SSIM", &|r| format!("{:.3}", r.ssim), &mut out);
            out.push('\n');
        }
        out
    }
}

/// First row of a `width`-bin interval centred on `anchor`, kept in range.
pub fn centred_interval(anchor: usize, width: usize, bins: usize) -> usize {
    anchor.saturating_sub(width / 2).min(bins.saturating_sub(width))
}

fn baseline_slow_time(profiles: &Array2<Complex64>, width: usize, rate: f64) -> Result<ComplexSignal> {
    let width = width.min(profiles.nrows());
    let start = centred_interval(ebd_anchor(profiles)?, width, profiles.nrows());
    slow_time_from_rows(profiles, start, width, rate)
}

/// Computes the noise sweep without touching the file system.
pub fn run_dynamic(cfg: &RunConfig) -> Result<DynamicResult> {
    let d = &cfg.dynamic;
    let spec = cfg.dynamic_scene()?;
    let scene = simulate_dynamic_scene(&spec).map_err(Error::in_stage("synth"))?;
    let rate = spec.chirp_rate_hz;

    let reference = (|| {
        let profiles = range_time_profiles(&scene.cube, 0)?;
        let slow = baseline_slow_time(&profiles, d.interval_width, rate)?;
        to_gray(&md_spectrogram(&slow, &d.stft)?, d.denoise.dynamic_range_db)
    })()
    .map_err(Error::in_stage("reference"))?;

    let grid: Vec<(usize, f64, Method)> = d
        .snr_db
        .iter()
        .enumerate()
        .flat_map(|(i, &s)| d.methods.iter().map(move |&m| (i, s, m)))
        .collect();

    let cells = grid
        .par_iter()
        .map(|&(i, snr, method)| -> Result<DynamicCell> {
            // same noise realisation for every method at a given SNR
            let noisy = add_wgn_cube(&scene.cube, snr, derive_seed(cfg.seed, 1 + i as u64))
                .map_err(Error::in_stage("noise"))?;
            let image = (|| {
                let profiles = range_time_profiles(&noisy, 0)?;
                match method {
                    Method::Ebd => {
                        let iv = ebd_select_interval(&profiles, rate, d.interval_width, d.ebd_candidates, &d.ebd_stft)?;
                        let slow = slow_time_from_rows(&profiles, iv.start_bin, iv.width_bins, rate)?;
                        denoise_pipeline(&md_spectrogram(&slow, &d.ebd_stft)?, method, &d.denoise)
                    }
                    Method::Ath => {
                        let slow = baseline_slow_time(&profiles, d.interval_width, rate)?;
                        let cutoff = d.butterworth_cutoff_hz.unwrap_or_else(|| default_lowpass_cutoff(rate));
                        let filtered = butterworth4_lowpass_complex(&slow, cutoff)?;
                        denoise_pipeline(&md_spectrogram(&filtered, &d.stft)?, method, &d.denoise)
                    }
                    _ => {
                        let slow = baseline_slow_time(&profiles, d.interval_width, rate)?;
                        denoise_pipeline(&md_spectrogram(&slow, &d.stft)?, method, &d.denoise)
                    }
                }
            })()
            .map_err(Error::in_stage(&format!("denoise {} @ {snr} dB", method.label())))?;
            let metrics = MetricReport::compute(reference.to_f64().view(), image.to_f64().view(), 255.0, &d.ssim)
                .map_err(Error::in_stage(&format!("metrics {} @ {snr} dB", method.label())))?;
            Ok(DynamicCell {
                snr_db: snr,
                method,
                image,
                metrics,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DynamicResult { reference, cells })
}

pub fn cmd_dynamic_eval(cfg: &RunConfig, out_dir: &Path) -> Result<DynamicResult> {
    cfg.validate()?;
    let mut manifest = Manifest::create(out_dir)?;
    let result = with_pool(cfg.jobs, || run_dynamic(cfg))??;
    manifest.complete("sweep")?;

    let csv_path = out_dir.join("metrics.csv");
    io::write_csv(&csv_path, &result.rows())?;
    io::write_sidecar(
        &csv_path,
        &SidecarMeta::new(
            "dynamic-eval",
            serde_json::to_value(&cfg.dynamic)?,
            vec![cfg.seed],
            vec![AxisDescriptor::with_values("snr_db", "dB", cfg.dynamic.snr_db.clone())],
        ),
    )?;
    io::atomic_write(&out_dir.join("table.txt"), result.table(&cfg.dynamic.methods).as_bytes())?;
    manifest.complete("metrics")?;

    if cfg.dynamic.write_images {
        io::write_pgm(&out_dir.join("reference.pgm"), &result.reference)?;
        for (i, &snr) in cfg.dynamic.snr_db.iter().enumerate() {
            let tag = snr_tag(snr);
            let mut panels = vec![result.reference.clone()];
            for c in result.cells.iter().skip(i * cfg.dynamic.methods.len()).take(cfg.dynamic.methods.len()) {
                io::write_pgm(&out_dir.join(format!("snr_{tag}_{}.pgm", c.method.slug())), &c.image)?;
                panels.push(c.image.clone());
            }
            io::write_pgm(&out_dir.join(format!("grid_snr_{tag}.pgm")), &render::gray_grid(&panels, 3)?)?;
        }
        manifest.complete("images")?;
    }
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreRow {
    pub frame_index: usize,
    #[serde(rename = "S")]
    pub s: f64,
    pub lumps_score: f64,
    pub peak_score: f64,
    pub subpeak_count: usize,
    pub leftover_ratio: f64,
}

impl ScoreRow {
    pub fn new(frame_index: usize, f: &FrameScore) -> Self {
        Self {
            frame_index,
            s: f.s,
            lumps_score: f.lumps_score,
            peak_score: f.peak_score,
            subpeak_count: f.subpeak_count,
            leftover_ratio: f.leftover_ratio,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackRow {
    pub frame: usize,
    pub centroid_row: Option<f64>,
    pub centroid_col: Option<f64>,
    pub mode: &'static str,
    pub score: f64,
}

impl TrackRow {
    pub fn new(s: &TrackState) -> Self {
        Self {
            frame: s.frame_index,
            centroid_row: s.centroid.map(|c| c.0),
            centroid_col: s.centroid.map(|c| c.1),
            mode: s.mode.as_str(),
            score: s.score,
        }
    }
}

pub fn score_frames(frames: &[RaMap], params: &ScoreParams) -> Result<Vec<FrameScore>> {
    frames.par_iter().map(|f| cleanliness_score(f, params)).collect()
}

/// Soft and hard masks per frame. The hard mask follows the most recent
/// chosen lump, so coasting frames reuse it; frames without a track get
/// all-zero masks.
pub fn track_masks(
    shape: (usize, usize),
    states: &[TrackState],
    soft_radius_px: f64,
    hard_margin_px: usize,
) -> Result<(Vec<Array2<f64>>, Vec<Array2<f64>>)> {
    let mut soft = Vec::with_capacity(states.len());
    let mut hard = Vec::with_capacity(states.len());
    let mut last_bbox = None;
    for s in states {
        if let Some(l) = &s.chosen_lump {
            last_bbox = Some(l.bbox);
        }
        if s.mode == TrackMode::Lost {
            last_bbox = None;
        }
        match (s.centroid, last_bbox) {
            (Some(c), Some(b)) => {
                soft.push(soft_mask(shape, c, soft_radius_px)?.weights);
                hard.push(hard_mask(shape, b, hard_margin_px)?.weights);
            }
            _ => {
                soft.push(Array2::zeros(shape));
                hard.push(Array2::zeros(shape));
            }
        }
    }
    Ok((soft, hard))
}

pub fn stack(frames: &[Array2<f64>]) -> Result<Tensor> {
    let Some(first) = frames.first() else {
        return Err(Error::invalid("nothing to stack"));
    };
    let (r, c) = first.dim();
    let mut out = Array3::zeros((frames.len(), r, c));
    for (mut dst, f) in out.axis_iter_mut(Axis(0)).zip(frames) {
        if f.dim() != (r, c) {
            return Err(Error::invalid("frames differ in shape"));
        }
        dst.assign(f);
    }
    Tensor::from_real(&out.into_dyn())
}

/// Reads a `frame × range × angle` (or single `range × angle`) real tensor
/// as RA frames with pixel axes.
pub fn frames_from_tensor(t: &Tensor) -> Result<Vec<RaMap>> {
    let a = t.to_real()?;
    let a = match a.ndim() {
        2 => a.insert_axis(Axis(0)),
        3 => a,
        n => return Err(Error::invalid(format!("expected a 2- or 3-axis tensor, got {n} axes"))),
    };
    a.axis_iter(Axis(0))
        .enumerate()
        .map(|(i, f)| RaMap::from_pixels(f.into_dimensionality().expect("2 axes").to_owned(), i))
        .collect()
}

#[derive(Debug, Clone)]
pub struct StaticResult {
    pub frames: Vec<RaMap>,
    pub scores: Vec<FrameScore>,
    pub track: Vec<TrackState>,
    pub soft_masks: Vec<Array2<f64>>,
    pub hard_masks: Vec<Array2<f64>>,
    /// Primary target trajectory when the source provides one.
    pub truth: Option<Vec<(f64, f64)>>,
}

pub fn static_frames(cfg: &RunConfig) -> Result<(Vec<RaMap>, Option<Vec<(f64, f64)>>)> {
    if let Some(spec) = cfg.blob_spec()? {
        let seq = synth_blob_sequence(&spec).map_err(Error::in_stage("synth"))?;
        return Ok((seq.frames, Some(seq.truth)));
    }
    let (spec, n) = cfg.static_scene()?.expect("one of the two sources is set");
    let cubes = simulate_static_frames(&spec, n).map_err(Error::in_stage("synth"))?;
    let frames = build_ra_frames(&cubes, &cfg.static_eval.ra).map_err(Error::in_stage("ra-map"))?;
    Ok((frames, None))
}

pub fn run_static_on(
    frames: Vec<RaMap>,
    truth: Option<Vec<(f64, f64)>>,
    cfg: &RunConfig,
) -> Result<StaticResult> {
    let s = &cfg.static_eval;
    let scores = score_frames(&frames, &s.score).map_err(Error::in_stage("score"))?;
    let track = track_sequence(&frames, &s.tracker, &s.score).map_err(Error::in_stage("track"))?;
    let shape = frames[0].shape();
    let (soft_masks, hard_masks) =
        track_masks(shape, &track, s.soft_mask_radius_px, s.hard_mask_margin_px).map_err(Error::in_stage("mask"))?;
    Ok(StaticResult {
        frames,
        scores,
        track,
        soft_masks,
        hard_masks,
        truth,
    })
}

pub fn run_static(cfg: &RunConfig) -> Result<StaticResult> {
    let (frames, truth) = static_frames(cfg)?;
    run_static_on(frames, truth, cfg)
}

pub fn write_scores(path: &Path, scores: &[FrameScore]) -> Result<()> {
    let rows: Vec<ScoreRow> = scores.iter().enumerate().map(|(i, f)| ScoreRow::new(i, f)).collect();
    io::write_csv(path, &rows)
}

pub fn write_track(path: &Path, track: &[TrackState]) -> Result<()> {
    let rows: Vec<TrackRow> = track.iter().map(TrackRow::new).collect();
    io::write_csv(path, &rows)
}

fn frame_axes(frames: &[RaMap]) -> Vec<AxisDescriptor> {
    let f = &frames[0];
    vec![
        AxisDescriptor::index("frame"),
        AxisDescriptor::with_values("range", "m", f.range_axis_m.clone()),
        AxisDescriptor::with_values("angle", "deg", f.angle_grid_deg.clone()),
    ]
}

pub fn write_static_outputs(
    result: &StaticResult,
    cfg: &RunConfig,
    out_dir: &Path,
    manifest: &mut Manifest,
) -> Result<()> {
    let params = serde_json::to_value(&cfg.static_eval)?;
    let meta = |producer: &str| SidecarMeta::new(producer, params.clone(), vec![cfg.seed], frame_axes(&result.frames));

    let ra_path = out_dir.join("ra_frames.rdt");
    let ra: Vec<Array2<f64>> = result.frames.iter().map(|f| f.power.clone()).collect();
    io::write_tensor(&ra_path, &stack(&ra)?)?;
    io::write_sidecar(&ra_path, &meta("ra-frames"))?;
    manifest.complete("ra-frames")?;

    write_scores(&out_dir.join("scores.csv"), &result.scores)?;
    manifest.complete("score")?;
    write_track(&out_dir.join("track.csv"), &result.track)?;
    io::write_sidecar(&out_dir.join("track.csv"), &meta("track"))?;
    manifest.complete("track")?;

    for (name, masks) in [("soft_masks.rdt", &result.soft_masks), ("hard_masks.rdt", &result.hard_masks)] {
        let p = out_dir.join(name);
        io::write_tensor(&p, &stack(masks)?)?;
        io::write_sidecar(&p, &meta("mask"))?;
    }
    manifest.complete("mask")?;

    if cfg.static_eval.write_overlays {
        for (t, state) in result.track.iter().enumerate() {
            let frame = &result.frames[t];
            let overlay = render::lump_overlay(frame, &state.lumps, state.chosen_lump.as_ref());
            io::write_ppm(&out_dir.join(format!("overlay_{t:03}.ppm")), &overlay)?;
            let bbox = state.chosen_lump.as_ref().map(|l| l.bbox);
            let panel = render::mask_panel(frame, bbox, &result.soft_masks[t], &result.hard_masks[t])?;
            io::write_ppm(&out_dir.join(format!("masks_{t:03}.ppm")), &panel)?;
        }
        manifest.complete("overlays")?;
    }
    Ok(())
}

pub fn cmd_static_eval(cfg: &RunConfig, out_dir: &Path) -> Result<StaticResult> {
    cfg.validate()?;
    let mut manifest = Manifest::create(out_dir)?;
    let (frames, truth) = with_pool(cfg.jobs, || static_frames(cfg))??;
    manifest.complete("synth")?;
    let result = with_pool(cfg.jobs, || run_static_on(frames, truth, cfg))??;
    write_static_outputs(&result, cfg, out_dir, &mut manifest)?;
    Ok(result)
}

/// Track CSV plus mask tensors for frames already on disk.
pub fn track_frames(frames: Vec<RaMap>, cfg: &RunConfig, tracker: &TrackerParams) -> Result<StaticResult> {
    let mut cfg = cfg.clone();
    cfg.static_eval.tracker = *tracker;
    run_static_on(frames, None, &cfg)
}

//! Run configuration for the batch pipelines.
//!
//! A config is one JSON document. Unknown keys are rejected at every level
//! and all values are range-checked by [`RunConfig::validate`] before any
//! work starts. Minimal example:
//!
//! ```json
//! {
//!   "seed": 7,
//!   "dynamic": { "scene": { "preset": "walking-like" }, "snr_db": [10, -5] },
//!   "static": { "source": { "blobs": { "preset": "drifting" } } }
//! }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::denoise::{DenoiseParams, Method};
use crate::dsp::StftParams;
use crate::error::{Error, Result};
use crate::metrics::SsimParams;
use crate::quality::ScoreParams;
use crate::ra_map::RaParams;
use crate::synth::{Blob, BlobFieldSpec, DynamicSceneSpec, StaticSceneSpec, StaticTarget};
use crate::tracker::TrackerParams;

pub const DEFAULT_SEED: u64 = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    /// Worker threads; `None` uses all cores.
    pub jobs: Option<usize>,
    pub dynamic: DynamicConfig,
    #[serde(rename = "static")]
    pub static_eval: StaticConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            output_dir: None,
            jobs: None,
            dynamic: DynamicConfig::default(),
            static_eval: StaticConfig::default(),
        }
    }
}

/// Where a scene spec comes from. Exactly one key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum Source<T> {
    Preset(String),
    Inline(T),
    /// JSON file; relative paths resolve against the config file.
    Path(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicConfig {
    pub scene: Source<DynamicSceneSpec>,
    pub methods: Vec<Method>,
    pub snr_db: Vec<f64>,
    pub stft: StftParams,
    pub denoise: DenoiseParams,
    /// Range bins summed into the slow-time signal (also the EBD interval width).
    pub interval_width: usize,
    /// EBD candidate intervals around the anchor.
    pub ebd_candidates: usize,
    pub ebd_stft: StftParams,
    /// Low-pass cutoff for the ATh branch; `None` is 0.8 × slow-time Nyquist.
    pub butterworth_cutoff_hz: Option<f64>,
    pub ssim: SsimParams,
    pub write_images: bool,
}

impl Default for DynamicConfig {
    fn default() -> Self {
        Self {
            scene: Source::Preset("walking-like".into()),
            methods: Method::ALL.to_vec(),
            snr_db: vec![10.0, 5.0, 0.0, -5.0, -10.0],
            stft: StftParams::default(),
            denoise: DenoiseParams::default(),
            interval_width: 5,
            ebd_candidates: 7,
            ebd_stft: StftParams::gaussian(),
            butterworth_cutoff_hz: None,
            ssim: SsimParams::default(),
            write_images: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum StaticSource {
    /// Synthetic RA frames drawn directly.
    Blobs(Source<BlobFieldSpec>),
    /// IQ cubes beamformed into RA frames.
    Scene {
        spec: Source<StaticSceneSpec>,
        frames: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StaticConfig {
    pub source: StaticSource,
    pub ra: RaParams,
    pub score: ScoreParams,
    pub tracker: TrackerParams,
    pub soft_mask_radius_px: f64,
    pub hard_mask_margin_px: usize,
    pub write_overlays: bool,
}

impl Default for StaticConfig {
    fn default() -> Self {
        Self {
            source: StaticSource::Blobs(Source::Preset("drifting".into())),
            ra: RaParams::default(),
            score: ScoreParams::default(),
            tracker: TrackerParams::default(),
            soft_mask_radius_px: 10.0,
            hard_mask_margin_px: 2,
            write_overlays: true,
        }
    }
}

/// Named blob sequences.
///
/// `drifting`: a primary blob moving 2 px/frame across a 128×128 map, a
/// slightly weaker clutter lump at least 60 px away and a noise floor, so frames score
/// below the default `tau` and the tracker relies on gating. Frames 12–14
/// drop the primary blob (short dropout, coasted) and frames 24–30 drop it
/// again (long dropout, track reset).
pub fn blob_preset(name: &str, seed: u64) -> Result<BlobFieldSpec> {
    match name {
        "drifting" => Ok(BlobFieldSpec {
            frame_shape: (128, 128),
            blobs: vec![Blob {
                centroid: (30.0, 20.0),
                sigma_px: 2.5,
                amplitude: 1.0,
                drift_px_per_frame: (0.0, 2.0),
            }],
            clutter_lumps: vec![Blob {
                centroid: (100.0, 64.0),
                sigma_px: 2.5,
                amplitude: 0.8,
                drift_px_per_frame: (0.0, 0.0),
            }],
            noise_sigma: 0.01,
            frames: 40,
            dropout_frames: (12..15).chain(24..31).collect(),
            rng_seed: seed,
        }),
        other => Err(Error::Config(format!("unknown blob preset '{other}' (known: drifting)"))),
    }
}

/// Named static scenes: `two-targets` places a strong and a weak reflector.
pub fn static_scene_preset(name: &str, seed: u64) -> Result<StaticSceneSpec> {
    match name {
        "two-targets" => Ok(StaticSceneSpec {
            targets: vec![
                StaticTarget {
                    amplitude: 1.0,
                    range_m: 1.2,
                    azimuth_deg: 20.0,
                },
                StaticTarget {
                    amplitude: 0.3,
                    range_m: 2.4,
                    azimuth_deg: -30.0,
                },
            ],
            rx_channels: 3,
            element_spacing_wavelengths: 0.5,
            chirps: 64,
            samples_per_chirp: 64,
            range_resolution_m: 0.1,
            chirp_rate_hz: 1000.0,
            noise_power: 0.01,
            rng_seed: seed,
        }),
        other => Err(Error::Config(format!(
            "unknown static scene preset '{other}' (known: two-targets)"
        ))),
    }
}

fn resolve<T: for<'de> Deserialize<'de> + Clone>(
    src: &Source<T>,
    base: &Path,
    preset: impl Fn(&str) -> Result<T>,
) -> Result<T> {
    match src {
        Source::Preset(name) => preset(name),
        Source::Inline(spec) => Ok(spec.clone()),
        Source::Path(p) => {
            let full = if p.is_absolute() { p.clone() } else { base.join(p) };
            let bytes = std::fs::read(&full).map_err(|e| Error::Config(format!("{}: {e}", full.display())))?;
            serde_json::from_slice(&bytes).map_err(|e| Error::Config(format!("{}: {e}", full.display())))
        }
    }
}

impl RunConfig {
    /// Parses and validates a config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")))?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Turns `path` sources into inline specs so later stages never touch
    /// the file system for configuration.
    fn resolve_paths(&mut self, base: &Path) -> Result<()> {
        if let Source::Path(_) = self.dynamic.scene {
            let spec = resolve(&self.dynamic.scene, base, |_| unreachable!())?;
            self.dynamic.scene = Source::Inline(spec);
        }
        match &mut self.static_eval.source {
            StaticSource::Blobs(src @ Source::Path(_)) => *src = Source::Inline(resolve(src, base, |_| unreachable!())?),
            StaticSource::Scene {
                spec: src @ Source::Path(_),
                ..
            } => *src = Source::Inline(resolve(src, base, |_| unreachable!())?),
            _ => {}
        }
        self.validate()
    }

    /// Dynamic scene spec with the run seed applied to presets.
    pub fn dynamic_scene(&self) -> Result<DynamicSceneSpec> {
        resolve(&self.dynamic.scene, Path::new("."), |name| {
            DynamicSceneSpec::preset(name, self.seed).map_err(|e| Error::Config(e.to_string()))
        })
    }

    pub fn blob_spec(&self) -> Result<Option<BlobFieldSpec>> {
        match &self.static_eval.source {
            StaticSource::Blobs(src) => resolve(src, Path::new("."), |n| blob_preset(n, self.seed)).map(Some),
            StaticSource::Scene { .. } => Ok(None),
        }
    }

    pub fn static_scene(&self) -> Result<Option<(StaticSceneSpec, usize)>> {
        match &self.static_eval.source {
            StaticSource::Scene { spec, frames } => {
                Ok(Some((resolve(spec, Path::new("."), |n| static_scene_preset(n, self.seed))?, *frames)))
            }
            StaticSource::Blobs(_) => Ok(None),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.jobs == Some(0) {
            return bad("jobs must be at least 1".into());
        }
        let d = &self.dynamic;
        if d.methods.is_empty() {
            return bad("dynamic.methods is empty".into());
        }
        if d.snr_db.is_empty() || d.snr_db.iter().any(|s| !s.is_finite()) {
            return bad("dynamic.snr_db must be a non-empty list of finite values".into());
        }
        if d.interval_width == 0 || d.ebd_candidates == 0 {
            return bad("dynamic.interval_width and dynamic.ebd_candidates must be positive".into());
        }
        if let Some(fc) = d.butterworth_cutoff_hz {
            if !(fc > 0.0) {
                return bad(format!("dynamic.butterworth_cutoff_hz must be positive, got {fc}"));
            }
        }
        let dn = &d.denoise;
        if !(dn.dynamic_range_db > 0.0 && dn.ath_tol > 0.0 && dn.apr_gamma > 0.0 && dn.ebd_beta >= 0.0) {
            return bad("dynamic.denoise values out of range".into());
        }
        if !(dn.apr_energy_fraction > 0.0 && dn.apr_energy_fraction <= 1.0) {
            return bad("dynamic.denoise.apr_energy_fraction must lie in (0, 1]".into());
        }
        if d.ssim.window == 0 || !(d.ssim.sigma > 0.0) {
            return bad("dynamic.ssim window and sigma must be positive".into());
        }
        for (name, p) in [("dynamic.stft", &d.stft), ("dynamic.ebd_stft", &d.ebd_stft)] {
            if !(p.window_duration_s > 0.0 && (0.0..1.0).contains(&p.overlap_fraction)) {
                return bad(format!("{name}: window duration must be positive and overlap in [0, 1)"));
            }
        }
        if let Source::Inline(spec) = &d.scene {
            spec.validate().map_err(|e| Error::Config(format!("dynamic.scene: {e}")))?;
        }

        let s = &self.static_eval;
        s.score
            .validate()
            .map_err(|e| Error::Config(format!("static.score: {e}")))?;
        s.tracker
            .validate()
            .map_err(|e| Error::Config(format!("static.tracker: {e}")))?;
        if !(s.soft_mask_radius_px > 0.0) {
            return bad("static.soft_mask_radius_px must be positive".into());
        }
        if s.ra.angle_grid_deg.is_empty() || !(s.ra.loading_factor >= 0.0) {
            return bad("static.ra: angle grid must be non-empty and loading ≥ 0".into());
        }
        match &s.source {
            StaticSource::Blobs(Source::Inline(spec)) => {
                spec.validate().map_err(|e| Error::Config(format!("static.source: {e}")))?
            }
            StaticSource::Scene { spec, frames } => {
                if *frames == 0 {
                    return bad("static.source.scene.frames must be positive".into());
                }
                if let Source::Inline(spec) = spec {
                    spec.validate().map_err(|e| Error::Config(format!("static.source: {e}")))?
                }
            }
            _ => {}
        }
        Ok(())
    }
}

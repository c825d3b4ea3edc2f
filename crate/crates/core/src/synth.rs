//! Ground-truth-annotated synthetic radar data.
//!
//! Ranges and velocities map linearly onto beat and Doppler frequencies
//! through explicit scale constants instead of a chirp-level dechirp model,
//! so every expected bin is available in closed form.

use std::f64::consts::PI;

use ndarray::{Array2, Array3};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cube::IqCube;
use crate::dsp::ComplexSignal;
use crate::error::{Error, Result};
use crate::ra_map::RaMap;

/// Deterministic generator for stream `index` of a run seeded with `seed`.
/// Parallel and serial generation draw identical streams.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    // splitmix64 finalizer over the combined key
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
}

pub(crate) fn complex_gaussian<R: Rng>(rng: &mut R, power: f64) -> Complex64 {
    let scale = (power / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * scale, im * scale)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Micromotion {
    pub amplitude_mps: f64,
    pub frequency_hz: f64,
    #[serde(default)]
    pub phase_rad: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scatterer {
    pub amplitude: f64,
    pub base_range_m: f64,
    pub base_velocity_mps: f64,
    #[serde(default)]
    pub micromotion: Micromotion,
}

impl Scatterer {
    /// `v(t) = v0 + A sin(2π f t + φ)`
    pub fn velocity(&self, t: f64) -> f64 {
        let m = &self.micromotion;
        self.base_velocity_mps + m.amplitude_mps * (2.0 * PI * m.frequency_hz * t + m.phase_rad).sin()
    }

    /// `∫₀ᵗ v(s) ds`, in closed form.
    pub fn displacement(&self, t: f64) -> f64 {
        let m = &self.micromotion;
        if m.frequency_hz == 0.0 {
            return (self.base_velocity_mps + m.amplitude_mps * m.phase_rad.sin()) * t;
        }
        let w = 2.0 * PI * m.frequency_hz;
        self.base_velocity_mps * t + m.amplitude_mps / w * (m.phase_rad.cos() - (w * t + m.phase_rad).cos())
    }

    fn peak_speed(&self) -> f64 {
        let m = &self.micromotion;
        if m.frequency_hz == 0.0 {
            (self.base_velocity_mps + m.amplitude_mps * m.phase_rad.sin()).abs()
        } else {
            self.base_velocity_mps.abs() + m.amplitude_mps
        }
    }
}

/// Scene of moving point scatterers observed at a single receive channel.
///
/// The fast-time sample rate is `samples_per_chirp × chirp_rate_hz`, so a
/// scatterer at range `r` lands in range bin `range_scale_hz_per_m · r /
/// chirp_rate_hz`. Ranges are held at `base_range_m` (no range migration).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicSceneSpec {
    pub scatterers: Vec<Scatterer>,
    pub chirps: usize,
    pub samples_per_chirp: usize,
    pub chirp_rate_hz: f64,
    pub range_scale_hz_per_m: f64,
    pub doppler_scale_hz_per_mps: f64,
    #[serde(default)]
    pub rng_seed: u64,
}

/// Output of [`simulate_dynamic_scene`].
#[derive(Debug, Clone)]
pub struct DynamicScene {
    /// Slow-time beat signal, sampled at the chirp rate.
    pub slow_time: ComplexSignal,
    /// Single-channel IQ cube carrying the same scatterers at their range bins.
    pub cube: IqCube,
    /// Instantaneous Doppler in Hz, `[scatterer][chirp]`.
    pub doppler_truth_hz: Vec<Vec<f64>>,
}

impl DynamicSceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.scatterers.is_empty() {
            return Err(Error::invalid("dynamic scene needs at least one scatterer"));
        }
        if self.chirps == 0 || self.samples_per_chirp == 0 {
            return Err(Error::invalid("chirps and samples_per_chirp must be positive"));
        }
        for (name, v) in [
            ("chirp_rate_hz", self.chirp_rate_hz),
            ("range_scale_hz_per_m", self.range_scale_hz_per_m),
            ("doppler_scale_hz_per_mps", self.doppler_scale_hz_per_mps),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        let doppler_nyquist = self.chirp_rate_hz / 2.0;
        let beat_nyquist = self.fast_sample_rate_hz() / 2.0;
        for (i, s) in self.scatterers.iter().enumerate() {
            if !(s.amplitude > 0.0) || !(s.base_range_m >= 0.0) {
                return Err(Error::invalid(format!(
                    "scatterer {i}: amplitude must be > 0 and range ≥ 0"
                )));
            }
            if s.micromotion.amplitude_mps < 0.0 || s.micromotion.frequency_hz < 0.0 {
                return Err(Error::invalid(format!(
                    "scatterer {i}: micromotion amplitude and frequency must be ≥ 0"
                )));
            }
            let fd = self.doppler_scale_hz_per_mps * s.peak_speed();
            if fd >= doppler_nyquist {
                return Err(Error::invalid(format!(
                    "scatterer {i}: peak Doppler {fd:.1} Hz exceeds slow-time Nyquist {doppler_nyquist:.1} Hz"
                )));
            }
            let fb = self.range_scale_hz_per_m * s.base_range_m;
            if fb >= beat_nyquist {
                return Err(Error::invalid(format!(
                    "scatterer {i}: beat frequency {fb:.1} Hz exceeds fast-time Nyquist {beat_nyquist:.1} Hz"
                )));
            }
        }
        Ok(())
    }

    pub fn fast_sample_rate_hz(&self) -> f64 {
        self.samples_per_chirp as f64 * self.chirp_rate_hz
    }

    /// Metres per bin of a `samples_per_chirp`-point range FFT.
    pub fn range_resolution_m(&self) -> f64 {
        self.chirp_rate_hz / self.range_scale_hz_per_m
    }

    /// Named illustrative presets. They are qualitative stand-ins, not
    /// measured activity signatures.
    pub fn preset(name: &str, rng_seed: u64) -> Result<Self> {
        let mm = |amplitude_mps, frequency_hz, phase_rad| Micromotion {
            amplitude_mps,
            frequency_hz,
            phase_rad,
        };
        let sc = |amplitude, base_range_m, base_velocity_mps, micromotion| Scatterer {
            amplitude,
            base_range_m,
            base_velocity_mps,
            micromotion,
        };
        let scatterers = match name {
            "walking-like" => vec![
                sc(1.0, 2.0, 0.6, mm(0.3, 1.0, 0.0)),
                sc(0.4, 2.0, 0.6, mm(1.4, 1.0, 0.0)),
                sc(0.4, 2.0, 0.6, mm(1.4, 1.0, PI)),
                sc(0.5, 2.25, 0.6, mm(2.0, 1.0, PI / 2.0)),
                sc(0.5, 2.25, 0.6, mm(2.0, 1.0, 3.0 * PI / 2.0)),
            ],
            "static-sit" => vec![
                sc(1.0, 1.5, 0.0, mm(0.05, 0.3, 0.0)),
                sc(0.2, 1.5, 0.0, mm(0.3, 0.5, PI / 3.0)),
            ],
            other => {
                return Err(Error::invalid(format!(
                    "unknown preset '{other}' (known: walking-like, static-sit)"
                )))
            }
        };
        Ok(Self {
            scatterers,
            chirps: 4000,
            samples_per_chirp: 32,
            chirp_rate_hz: 1000.0,
            range_scale_hz_per_m: 4000.0,
            doppler_scale_hz_per_mps: 100.0,
            rng_seed,
        })
    }
}

/// Synthesizes the slow-time signal `Σ a·exp(j(θ₀ + 2π·D·∫v))` together with
/// a matching IQ cube and the per-chirp Doppler ground truth. Each
/// scatterer's initial phase `θ₀` is drawn from the seed.
pub fn simulate_dynamic_scene(spec: &DynamicSceneSpec) -> Result<DynamicScene> {
    spec.validate()?;
    let mut rng = stream_rng(spec.rng_seed, 0);
    let phases: Vec<f64> = spec
        .scatterers
        .iter()
        .map(|_| rng.random_range(0.0..2.0 * PI))
        .collect();
    let n = spec.samples_per_chirp;
    let dt = 1.0 / spec.chirp_rate_hz;
    let d = spec.doppler_scale_hz_per_mps;

    let mut slow = vec![Complex64::new(0.0, 0.0); spec.chirps];
    let mut cube = Array3::zeros((1, spec.chirps, n));
    let mut truth = vec![Vec::with_capacity(spec.chirps); spec.scatterers.len()];
    for (s, (sc, &theta0)) in spec.scatterers.iter().zip(&phases).enumerate() {
        let beat_cycles_per_sample = spec.range_scale_hz_per_m * sc.base_range_m / spec.fast_sample_rate_hz();
        let fast: Vec<Complex64> = (0..n)
            .map(|i| Complex64::from_polar(1.0, 2.0 * PI * beat_cycles_per_sample * i as f64))
            .collect();
        for (c, acc) in slow.iter_mut().enumerate() {
            let t = c as f64 * dt;
            let z = Complex64::from_polar(sc.amplitude, theta0 + 2.0 * PI * d * sc.displacement(t));
            *acc += z;
            for (i, f) in fast.iter().enumerate() {
                cube[(0, c, i)] += z * f;
            }
            truth[s].push(d * sc.velocity(t));
        }
    }
    Ok(DynamicScene {
        slow_time: ComplexSignal::new(slow, spec.chirp_rate_hz)?,
        cube: IqCube::new(cube, spec.chirp_rate_hz, spec.range_resolution_m())?,
        doppler_truth_hz: truth,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticTarget {
    pub amplitude: f64,
    pub range_m: f64,
    pub azimuth_deg: f64,
}

/// Static reflectors seen by a uniform linear receive array.
///
/// A target at `range_m` produces a fast-time tone landing exactly in range
/// bin `range_m / range_resolution_m`. Each target's phase is redrawn per
/// chirp, which keeps distinct targets mutually incoherent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticSceneSpec {
    pub targets: Vec<StaticTarget>,
    #[serde(default = "default_rx_channels")]
    pub rx_channels: usize,
    #[serde(default = "default_spacing")]
    pub element_spacing_wavelengths: f64,
    pub chirps: usize,
    pub samples_per_chirp: usize,
    #[serde(default = "default_range_resolution")]
    pub range_resolution_m: f64,
    #[serde(default = "default_chirp_rate")]
    pub chirp_rate_hz: f64,
    #[serde(default)]
    pub noise_power: f64,
    #[serde(default)]
    pub rng_seed: u64,
}

fn default_rx_channels() -> usize {
    3
}
fn default_spacing() -> f64 {
    0.5
}
fn default_range_resolution() -> f64 {
    0.1
}
fn default_chirp_rate() -> f64 {
    1000.0
}

impl StaticSceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.rx_channels < 2 {
            return Err(Error::invalid(format!(
                "angle estimation needs at least 2 receive channels, got {}",
                self.rx_channels
            )));
        }
        if self.chirps == 0 || self.samples_per_chirp == 0 {
            return Err(Error::invalid("chirps and samples_per_chirp must be positive"));
        }
        if !(self.element_spacing_wavelengths > 0.0
            && self.range_resolution_m > 0.0
            && self.chirp_rate_hz > 0.0
            && self.noise_power >= 0.0)
        {
            return Err(Error::invalid(
                "spacing, range resolution and chirp rate must be positive; noise power ≥ 0",
            ));
        }
        let max_bin = self.samples_per_chirp as f64 / 2.0;
        for (i, t) in self.targets.iter().enumerate() {
            if !(t.amplitude > 0.0) || !(t.range_m >= 0.0) {
                return Err(Error::invalid(format!("target {i}: amplitude > 0 and range ≥ 0 required")));
            }
            if !(-90.0..=90.0).contains(&t.azimuth_deg) {
                return Err(Error::invalid(format!("target {i}: azimuth outside [-90, 90]")));
            }
            if t.range_m / self.range_resolution_m >= max_bin {
                return Err(Error::invalid(format!("target {i}: range beyond the unambiguous limit")));
            }
        }
        Ok(())
    }
}

/// Frame 0 of [`simulate_static_frames`].
pub fn simulate_static_scene(spec: &StaticSceneSpec) -> Result<IqCube> {
    spec.validate()?;
    static_frame(spec, 0)
}

pub fn simulate_static_frames(spec: &StaticSceneSpec, frames: usize) -> Result<Vec<IqCube>> {
    spec.validate()?;
    (0..frames).map(|f| static_frame(spec, f as u64)).collect()
}

fn static_frame(spec: &StaticSceneSpec, frame: u64) -> Result<IqCube> {
    let mut rng = stream_rng(spec.rng_seed, frame);
    let (m_ch, k_ch, n) = (spec.rx_channels, spec.chirps, spec.samples_per_chirp);
    let mut data = Array3::zeros((m_ch, k_ch, n));
    for t in &spec.targets {
        let cycles = t.range_m / spec.range_resolution_m / n as f64;
        let spatial = 2.0 * PI * spec.element_spacing_wavelengths * t.azimuth_deg.to_radians().sin();
        for k in 0..k_ch {
            let phi: f64 = rng.random_range(0.0..2.0 * PI);
            for m in 0..m_ch {
                for i in 0..n {
                    data[(m, k, i)] += Complex64::from_polar(
                        t.amplitude,
                        phi + 2.0 * PI * cycles * i as f64 + spatial * m as f64,
                    );
                }
            }
        }
    }
    if spec.noise_power > 0.0 {
        data.iter_mut()
            .for_each(|z| *z += complex_gaussian(&mut rng, spec.noise_power));
    }
    IqCube::new(data, spec.chirp_rate_hz, spec.range_resolution_m)
}

/// Gaussian blob on an RA-map pixel grid. `drift_px_per_frame` moves the
/// centroid linearly with the frame index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Blob {
    pub centroid: (f64, f64),
    pub sigma_px: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub drift_px_per_frame: (f64, f64),
}

impl Blob {
    pub fn centroid_at(&self, frame: usize) -> (f64, f64) {
        (
            self.centroid.0 + self.drift_px_per_frame.0 * frame as f64,
            self.centroid.1 + self.drift_px_per_frame.1 * frame as f64,
        )
    }
}

/// Sequence of synthetic RA frames. `blobs[0]` is the primary target whose
/// trajectory is reported as ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlobFieldSpec {
    pub frame_shape: (usize, usize),
    pub blobs: Vec<Blob>,
    #[serde(default)]
    pub clutter_lumps: Vec<Blob>,
    #[serde(default)]
    pub noise_sigma: f64,
    pub frames: usize,
    #[serde(default)]
    pub dropout_frames: Vec<usize>,
    #[serde(default)]
    pub rng_seed: u64,
}

#[derive(Debug, Clone)]
pub struct BlobSequence {
    pub frames: Vec<RaMap>,
    /// Primary blob centroid `(row, col)` per frame.
    pub truth: Vec<(f64, f64)>,
}

impl BlobFieldSpec {
    pub fn validate(&self) -> Result<()> {
        let (rows, cols) = self.frame_shape;
        if rows == 0 || cols == 0 || self.frames == 0 {
            return Err(Error::invalid("frame shape and frame count must be positive"));
        }
        if self.blobs.is_empty() {
            return Err(Error::invalid("blob field needs a primary blob"));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::invalid("noise sigma must be ≥ 0"));
        }
        for (kind, list) in [("blob", &self.blobs), ("clutter lump", &self.clutter_lumps)] {
            for (i, b) in list.iter().enumerate() {
                if !(b.sigma_px > 0.0 && b.amplitude > 0.0) {
                    return Err(Error::invalid(format!("{kind} {i}: sigma and amplitude must be positive")));
                }
                for f in 0..self.frames {
                    let (r, c) = b.centroid_at(f);
                    if !(r >= 0.0 && r <= (rows - 1) as f64 && c >= 0.0 && c <= (cols - 1) as f64) {
                        return Err(Error::invalid(format!(
                            "{kind} {i}: centroid ({r:.2}, {c:.2}) leaves the {rows}×{cols} frame at frame {f}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

pub fn synth_blob_sequence(spec: &BlobFieldSpec) -> Result<BlobSequence> {
    spec.validate()?;
    let frames = (0..spec.frames)
        .map(|f| blob_frame(spec, f))
        .collect::<Result<Vec<_>>>()?;
    let truth = (0..spec.frames).map(|f| spec.blobs[0].centroid_at(f)).collect();
    Ok(BlobSequence { frames, truth })
}

fn blob_frame(spec: &BlobFieldSpec, frame: usize) -> Result<RaMap> {
    let (rows, cols) = spec.frame_shape;
    let dropped = spec.dropout_frames.contains(&frame);
    let mut power = Array2::<f64>::zeros((rows, cols));
    let all = spec.blobs.iter().enumerate().chain(
        spec.clutter_lumps
            .iter()
            .enumerate()
            .map(|(i, b)| (i + spec.blobs.len(), b)),
    );
    for (i, b) in all {
        let amplitude = if i == 0 && dropped { 0.0 } else { b.amplitude };
        if amplitude == 0.0 {
            continue;
        }
        let (cr, cc) = b.centroid_at(frame);
        let inv = 1.0 / (2.0 * b.sigma_px * b.sigma_px);
        for ((r, c), v) in power.indexed_iter_mut() {
            let d2 = (r as f64 - cr).powi(2) + (c as f64 - cc).powi(2);
            *v += amplitude * (-d2 * inv).exp();
        }
    }
    if spec.noise_sigma > 0.0 {
        let mut rng = stream_rng(spec.rng_seed, frame as u64);
        power.iter_mut().for_each(|v| {
            let n: f64 = StandardNormal.sample(&mut rng);
            *v += (n * spec.noise_sigma).abs();
        });
    }
    RaMap::from_pixels(power, frame)
}

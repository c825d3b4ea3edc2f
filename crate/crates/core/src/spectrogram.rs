//! Range-time maps, micro-Doppler spectrograms, grayscale rendering and
//! white Gaussian noise injection at a calibrated SNR.

use ndarray::{s, Array2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cube::IqCube;
use crate::dsp::{make_window, stft, ComplexSignal, StftParams, Window};
use crate::error::{Error, Result};
use crate::synth::{complex_gaussian, stream_rng};

/// Linear-magnitude spectrogram, `doppler_bins × time_frames`. Row
/// `bins / 2` is zero Doppler.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub values: Array2<f64>,
    pub frame_hop_s: f64,
    pub bin_hz: f64,
}

impl Spectrogram {
    pub fn new(values: Array2<f64>, frame_hop_s: f64, bin_hz: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("spectrogram must be non-empty"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("spectrogram values must be finite and non-negative"));
        }
        Ok(Self {
            values,
            frame_hop_s,
            bin_hz,
        })
    }

    pub fn doppler_bins(&self) -> usize {
        self.values.nrows()
    }

    pub fn frames(&self) -> usize {
        self.values.ncols()
    }

    /// Row holding zero Doppler.
    pub fn dc_row(&self) -> usize {
        self.doppler_bins() / 2
    }

    /// Doppler frequency of row `k`.
    pub fn row_hz(&self, k: usize) -> f64 {
        (k as f64 - self.dc_row() as f64) * self.bin_hz
    }

    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

/// 8-bit rendering of a spectrogram.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub pixels: Array2<u8>,
    /// Absent for images that did not come from [`to_gray`].
    pub provenance: Option<GrayProvenance>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrayProvenance {
    pub dynamic_range_db: f64,
    /// Absolute level (dB re unit magnitude) that maps to pixel 0.
    pub floor_db: f64,
}

impl GrayImage {
    pub fn from_pixels(pixels: Array2<u8>) -> Self {
        Self {
            pixels,
            provenance: None,
        }
    }

    pub fn dim(&self) -> (usize, usize) {
        self.pixels.dim()
    }

    pub fn to_f64(&self) -> Array2<f64> {
        self.pixels.mapv(f64::from)
    }
}

/// Complex range profiles of one channel: Hamming-windowed fast-time DFT per
/// chirp, positive half kept. Shape `range_bins × chirps`.
pub fn range_time_profiles(iq: &IqCube, channel: usize) -> Result<Array2<Complex64>> {
    if channel >= iq.channels() {
        return Err(Error::invalid(format!(
            "channel {channel} out of range (cube has {})",
            iq.channels()
        )));
    }
    let n = iq.samples_per_chirp();
    let bins = (n / 2).max(1);
    let window = make_window(Window::Hamming, n)?;
    let fft = rustfft::FftPlanner::new().plan_fft_forward(n);
    let mut out = Array2::zeros((bins, iq.chirps()));
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..iq.chirps() {
        let lane = iq.data().slice(s![channel, k, ..]);
        for ((dst, &x), &w) in buf.iter_mut().zip(lane.iter()).zip(&window) {
            *dst = x * w;
        }
        fft.process(&mut buf);
        out.column_mut(k).iter_mut().zip(&buf).for_each(|(d, v)| *d = *v);
    }
    Ok(out)
}

/// Magnitude of [`range_time_profiles`].
pub fn range_time_map(iq: &IqCube, channel: usize) -> Result<Array2<f64>> {
    Ok(range_time_profiles(iq, channel)?.mapv(|z| z.norm()))
}

/// Coherent sum of range rows `[start, start + width)` as a slow-time signal.
pub fn slow_time_from_rows(
    profiles: &Array2<Complex64>,
    start: usize,
    width: usize,
    chirp_rate_hz: f64,
) -> Result<ComplexSignal> {
    if width == 0 || start + width > profiles.nrows() {
        return Err(Error::invalid(format!(
            "range interval [{start}, {}) outside {} bins",
            start + width,
            profiles.nrows()
        )));
    }
    let rows = profiles.slice(s![start..start + width, ..]);
    let samples = rows.columns().into_iter().map(|c| c.sum()).collect();
    ComplexSignal::new(samples, chirp_rate_hz)
}

/// `|STFT|` arranged as `doppler_bins × frames`.
pub fn md_spectrogram(slow_time: &ComplexSignal, params: &StftParams) -> Result<Spectrogram> {
    let layout = params.layout(slow_time.sample_rate_hz())?;
    let z = stft(slow_time, params)?;
    let values = z.t().mapv(|v| v.norm());
    Spectrogram::new(
        values,
        layout.hop as f64 / slow_time.sample_rate_hz(),
        slow_time.sample_rate_hz() / layout.fft_size as f64,
    )
}

pub const DEFAULT_DYNAMIC_RANGE_DB: f64 = 40.0;

/// `20·log10(v / max)` clipped to `[-dynamic_range_db, 0]` and mapped
/// affinely onto `0..=255`, rounding half away from zero.
pub fn to_gray(spec: &Spectrogram, dynamic_range_db: f64) -> Result<GrayImage> {
    if !(dynamic_range_db.is_finite() && dynamic_range_db > 0.0) {
        return Err(Error::invalid("dynamic range must be positive"));
    }
    let peak = spec.values.iter().cloned().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::invalid("cannot render an all-zero spectrogram"));
    }
    let pixels = spec.values.mapv(|v| {
        let db = if v > 0.0 { 20.0 * (v / peak).log10() } else { f64::NEG_INFINITY };
        let clipped = db.clamp(-dynamic_range_db, 0.0);
        ((clipped + dynamic_range_db) / dynamic_range_db * 255.0).round() as u8
    });
    Ok(GrayImage {
        pixels,
        provenance: Some(GrayProvenance {
            dynamic_range_db,
            floor_db: 20.0 * peak.log10() - dynamic_range_db,
        }),
    })
}

/// Noise power that yields `snr_db` against a signal of `signal_power`.
pub fn noise_power_for(signal_power: f64, snr_db: f64) -> f64 {
    signal_power / 10f64.powf(snr_db / 10.0)
}

/// Adds circular complex WGN scaled from the signal's measured power.
pub fn add_wgn_signal(signal: &ComplexSignal, snr_db: f64, rng_seed: u64) -> Result<ComplexSignal> {
    let noisy = add_wgn_samples(signal.samples(), snr_db, rng_seed)?;
    ComplexSignal::new(noisy, signal.sample_rate_hz())
}

/// Same as [`add_wgn_signal`] on a bare sample slice (e.g. a flattened cube).
pub fn add_wgn_samples(samples: &[Complex64], snr_db: f64, rng_seed: u64) -> Result<Vec<Complex64>> {
    if !snr_db.is_finite() {
        return Err(Error::invalid("SNR must be finite"));
    }
    let power = samples.iter().map(|z| z.norm_sqr()).sum::<f64>() / samples.len().max(1) as f64;
    if !(power > 0.0) {
        return Err(Error::invalid("cannot calibrate noise against a zero-power signal"));
    }
    let noise_power = noise_power_for(power, snr_db);
    let mut rng = stream_rng(rng_seed, 0);
    Ok(samples
        .iter()
        .map(|&x| x + complex_gaussian(&mut rng, noise_power))
        .collect())
}

/// Adds WGN to the cube's samples, calibrated on the whole cube's power.
pub fn add_wgn_cube(cube: &IqCube, snr_db: f64, rng_seed: u64) -> Result<IqCube> {
    let flat: Vec<Complex64> = cube.data().iter().copied().collect();
    let noisy = add_wgn_samples(&flat, snr_db, rng_seed)?;
    let data = ndarray::Array3::from_shape_vec(cube.data().dim(), noisy)
        .expect("shape preserved");
    IqCube::new(data, cube.chirp_rate_hz, cube.range_resolution_m)
}

/// Image-domain alternative: real Gaussian noise added to the linear
/// magnitudes, folded back to non-negative values.
pub fn add_wgn_image(spec: &Spectrogram, snr_db: f64, rng_seed: u64) -> Result<Spectrogram> {
    use rand_distr::{Distribution, StandardNormal};
    let power = spec.energy() / spec.values.len() as f64;
    if !(power > 0.0) {
        return Err(Error::invalid("cannot calibrate noise against a zero-power image"));
    }
    let sigma = noise_power_for(power, snr_db).sqrt();
    let mut rng = stream_rng(rng_seed, 0);
    let values = spec.values.mapv(|v| {
        let n: f64 = StandardNormal.sample(&mut rng);
        (v + sigma * n).abs()
    });
    Spectrogram::new(values, spec.frame_hop_s, spec.bin_hz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{simulate_static_scene, StaticSceneSpec, StaticTarget};
    use std::f64::consts::PI;

    fn gray_of(values: Vec<f64>) -> GrayImage {
        let n = values.len();
        let s = Spectrogram::new(Array2::from_shape_vec((n, 1), values).unwrap(), 1.0, 1.0).unwrap();
        to_gray(&s, 40.0).unwrap()
    }

    #[test]
    fn gray_mapping_points() {
        let g = gray_of(vec![1.0, 0.01, 0.1, 0.0, 1e-9]);
        assert_eq!(g.pixels[(0, 0)], 255);
        assert_eq!(g.pixels[(1, 0)], 0);
        assert!((g.pixels[(2, 0)] as i32 - 128).abs() <= 1);
        assert_eq!(g.pixels[(3, 0)], 0);
        assert_eq!(g.pixels[(4, 0)], 0);
        assert!((g.provenance.unwrap().floor_db + 40.0).abs() < 1e-12);
    }

    #[test]
    fn gray_rejects_zero() {
        let s = Spectrogram::new(Array2::zeros((3, 3)), 1.0, 1.0).unwrap();
        assert!(to_gray(&s, 40.0).is_err());
    }

    fn scene(targets: Vec<StaticTarget>) -> IqCube {
        simulate_static_scene(&StaticSceneSpec {
            targets,
            rx_channels: 2,
            element_spacing_wavelengths: 0.5,
            chirps: 6,
            samples_per_chirp: 64,
            range_resolution_m: 0.1,
            chirp_rate_hz: 1000.0,
            noise_power: 0.0,
            rng_seed: 8,
        })
        .unwrap()
    }

    #[test]
    fn range_time_single_target_row() {
        let cube = scene(vec![StaticTarget {
            amplitude: 1.0,
            range_m: 1.5,
            azimuth_deg: 0.0,
        }]);
        let map = range_time_map(&cube, 0).unwrap();
        assert_eq!(map.dim(), (32, 6));
        for col in map.columns() {
            let argmax = col
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0;
            assert_eq!(argmax, 15);
        }
        assert!(range_time_map(&cube, 2).is_err());
    }

    #[test]
    fn range_time_two_targets_energy_ratio() {
        let cube = scene(vec![
            StaticTarget {
                amplitude: 2.0,
                range_m: 0.8,
                azimuth_deg: 0.0,
            },
            StaticTarget {
                amplitude: 1.0,
                range_m: 2.4,
                azimuth_deg: 0.0,
            },
        ]);
        let map = range_time_map(&cube, 0).unwrap();
        let e = |r: usize| map.row(r).iter().map(|v| v * v).sum::<f64>();
        let ratio = e(8) / e(24);
        // Hamming sidelobes of each target leak ~1e-5 into the other row
        assert!((ratio - 4.0).abs() < 1e-3, "ratio {ratio}");
    }

    #[test]
    fn range_time_zero_input() {
        let cube = IqCube::new(ndarray::Array3::zeros((1, 3, 8)), 1.0, 1.0).unwrap();
        assert!(range_time_map(&cube, 0).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn wgn_calibration() {
        let fs = 1000.0;
        let x: Vec<_> = (0..100_000)
            .map(|n| Complex64::from_polar(1.0, 2.0 * PI * 0.01 * n as f64))
            .collect();
        let sig = ComplexSignal::new(x.clone(), fs).unwrap();
        for (snr, want) in [(10.0, 0.1), (0.0, 1.0)] {
            let noisy = add_wgn_signal(&sig, snr, 5).unwrap();
            let p: f64 = noisy
                .samples()
                .iter()
                .zip(&x)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                / x.len() as f64;
            assert!((p / want - 1.0).abs() < 0.05, "snr {snr}: {p}");
        }
        let noisy = add_wgn_signal(&sig, -5.0, 5).unwrap();
        let p: f64 = noisy.samples().iter().zip(&x).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>()
            / x.len() as f64;
        let measured = 10.0 * (1.0 / p).log10();
        assert!((measured + 5.0).abs() < 0.5);
    }

    #[test]
    fn wgn_noise_independent_of_content() {
        let a = ComplexSignal::new(vec![Complex64::new(1.0, 0.0); 64], 1.0).unwrap();
        let b = ComplexSignal::new(
            (0..64).map(|n| Complex64::from_polar(1.0, n as f64)).collect(),
            1.0,
        )
        .unwrap();
        let na = add_wgn_signal(&a, 3.0, 9).unwrap();
        let nb = add_wgn_signal(&b, 3.0, 9).unwrap();
        for i in 0..64 {
            let da = na.samples()[i] - a.samples()[i];
            let db = nb.samples()[i] - b.samples()[i];
            assert!((da - db).norm() < 1e-12);
        }
    }

    #[test]
    fn wgn_rejects_zero_power() {
        let z = ComplexSignal::new(vec![Complex64::new(0.0, 0.0); 4], 1.0).unwrap();
        assert!(add_wgn_signal(&z, 0.0, 1).is_err());
    }

    #[test]
    fn spectrogram_of_zero_is_zero() {
        let z = ComplexSignal::new(vec![Complex64::new(0.0, 0.0); 400], 1000.0).unwrap();
        let s = md_spectrogram(&z, &StftParams::default()).unwrap();
        assert!(s.values.iter().all(|v| *v == 0.0));
        assert_eq!(s.doppler_bins(), 256);
        assert!((s.frame_hop_s - 0.01).abs() < 1e-12);
    }
}

//! Signal kernels shared by the rest of the crate: windows, DFT, STFT, a
//! 4th-order Butterworth low-pass and Shannon entropy.
//!
//! Conventions:
//! - forward DFT is unnormalized, the inverse carries the `1/N`;
//! - STFT output is fftshifted, so with `N` bins the DC bin sits at row
//!   `N / 2` and row `k` corresponds to `(k - N/2) * fs / N` Hz;
//! - windows use the symmetric definition.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Real-valued signal with a sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct RealSignal {
    samples: Vec<f64>,
    sample_rate_hz: f64,
}

impl RealSignal {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64) -> Result<Self> {
        check_rate(sample_rate_hz)?;
        if samples.is_empty() {
            return Err(Error::invalid("signal must hold at least one sample"));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

/// Complex baseband signal with a sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSignal {
    samples: Vec<Complex64>,
    sample_rate_hz: f64,
}

impl ComplexSignal {
    pub fn new(samples: Vec<Complex64>, sample_rate_hz: f64) -> Result<Self> {
        check_rate(sample_rate_hz)?;
        if samples.is_empty() {
            return Err(Error::invalid("signal must hold at least one sample"));
        }
        if let Some(i) = samples.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::invalid(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean of `|x|^2` over all samples.
    pub fn power(&self) -> f64 {
        self.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }
}

fn check_rate(fs: f64) -> Result<()> {
    if fs.is_finite() && fs > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("sample rate must be positive, got {fs}")))
    }
}

/// A concrete window shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Window {
    Hamming,
    /// Gaussian with standard deviation given in samples.
    Gaussian { sigma: f64 },
}

/// Window family as selected by [`StftParams`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    Hamming,
    Gaussian,
}

/// Symmetric window of `length` samples with values in `[0, 1]`.
///
/// The Gaussian window is normalized to a peak of exactly 1, so even
/// lengths also reach 1 at the two central samples.
pub fn make_window(window: Window, length: usize) -> Result<Vec<f64>> {
    if length == 0 {
        return Err(Error::invalid("window length must be at least 1"));
    }
    if length == 1 {
        return Ok(vec![1.0]);
    }
    let last = (length - 1) as f64;
    match window {
        Window::Hamming => Ok((0..length)
            .map(|k| 0.54 - 0.46 * (2.0 * PI * k as f64 / last).cos())
            .collect()),
        Window::Gaussian { sigma } => {
            if !(sigma.is_finite() && sigma > 0.0) {
                return Err(Error::invalid(format!(
                    "gaussian sigma must be positive, got {sigma}"
                )));
            }
            let center = last / 2.0;
            let g = |k: f64| (-0.5 * ((k - center) / sigma).powi(2)).exp();
            let peak = g(center.floor());
            Ok((0..length)
                .map(|k| (g(k as f64) / peak).min(1.0))
                .collect())
        }
    }
}

/// Forward DFT of `signal` zero-padded to `fft_size`. No normalization.
pub fn dft(signal: &ComplexSignal, fft_size: usize) -> Result<Vec<Complex64>> {
    dft_slice(signal.samples(), fft_size)
}

pub(crate) fn dft_slice(samples: &[Complex64], fft_size: usize) -> Result<Vec<Complex64>> {
    if fft_size == 0 || fft_size < samples.len() {
        return Err(Error::invalid(format!(
            "fft size {fft_size} must be at least the signal length {}",
            samples.len()
        )));
    }
    let mut buf = Vec::with_capacity(fft_size);
    buf.extend_from_slice(samples);
    buf.resize(fft_size, Complex64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(fft_size).process(&mut buf);
    Ok(buf)
}

/// Inverse DFT with `1/N` normalization.
pub fn idft(spectrum: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = spectrum.len();
    if n == 0 {
        return Err(Error::invalid("inverse DFT of an empty spectrum"));
    }
    let mut buf = spectrum.to_vec();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter_mut().for_each(|z| *z *= scale);
    Ok(buf)
}

/// Rotate a spectrum so the DC bin lands at index `len / 2`.
pub fn fftshift<T: Clone>(data: &mut [T]) {
    let n = data.len();
    data.rotate_right(n / 2);
}

/// Short-time Fourier transform parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StftParams {
    pub window_kind: WindowKind,
    pub window_duration_s: f64,
    pub overlap_fraction: f64,
    /// Transform length; `None` picks the next power of two at or above
    /// the window length.
    #[serde(default)]
    pub fft_size: Option<usize>,
    /// Gaussian standard deviation as a fraction of the window length.
    #[serde(default = "default_sigma_fraction")]
    pub gaussian_sigma_fraction: f64,
}

fn default_sigma_fraction() -> f64 {
    0.125
}

impl Default for StftParams {
    fn default() -> Self {
        Self {
            window_kind: WindowKind::Hamming,
            window_duration_s: 0.2,
            overlap_fraction: 0.95,
            fft_size: None,
            gaussian_sigma_fraction: default_sigma_fraction(),
        }
    }
}

/// Frame geometry resolved against a sample rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StftLayout {
    pub window_len: usize,
    pub hop: usize,
    pub fft_size: usize,
}

impl StftLayout {
    /// Number of complete frames for a signal of `len` samples.
    pub fn frames(&self, len: usize) -> usize {
        if len < self.window_len {
            0
        } else {
            (len - self.window_len) / self.hop + 1
        }
    }
}

impl StftParams {
    pub fn gaussian() -> Self {
        Self {
            window_kind: WindowKind::Gaussian,
            ..Self::default()
        }
    }

    pub fn layout(&self, sample_rate_hz: f64) -> Result<StftLayout> {
        check_rate(sample_rate_hz)?;
        if !(self.window_duration_s.is_finite() && self.window_duration_s > 0.0) {
            return Err(Error::invalid("window duration must be positive"));
        }
        if !(0.0..1.0).contains(&self.overlap_fraction) {
            return Err(Error::invalid(format!(
                "overlap fraction must lie in [0, 1), got {}",
                self.overlap_fraction
            )));
        }
        let window_len = (self.window_duration_s * sample_rate_hz).round() as usize;
        if window_len == 0 {
            return Err(Error::invalid("window shorter than one sample"));
        }
        let hop = (window_len as f64 * (1.0 - self.overlap_fraction)).round() as usize;
        if hop == 0 {
            return Err(Error::invalid("overlap leaves a hop of zero samples"));
        }
        let fft_size = match self.fft_size {
            Some(n) if n < window_len => {
                return Err(Error::invalid(format!(
                    "fft size {n} is shorter than the window ({window_len} samples)"
                )))
            }
            Some(n) => n,
            None => window_len.next_power_of_two(),
        };
        Ok(StftLayout {
            window_len,
            hop,
            fft_size,
        })
    }

    pub fn window(&self, window_len: usize) -> Result<Vec<f64>> {
        let w = match self.window_kind {
            WindowKind::Hamming => Window::Hamming,
            WindowKind::Gaussian => {
                if !(self.gaussian_sigma_fraction > 0.0) {
                    return Err(Error::invalid("gaussian sigma fraction must be positive"));
                }
                Window::Gaussian {
                    sigma: self.gaussian_sigma_fraction * window_len as f64,
                }
            }
        };
        make_window(w, window_len)
    }
}

/// STFT as a `frames × fft_size` matrix with the frequency axis fftshifted.
pub fn stft(signal: &ComplexSignal, params: &StftParams) -> Result<Array2<Complex64>> {
    let layout = params.layout(signal.sample_rate_hz())?;
    let samples = signal.samples();
    if samples.len() < layout.window_len {
        return Err(Error::invalid(format!(
            "signal of {} samples is shorter than one window ({})",
            samples.len(),
            layout.window_len
        )));
    }
    let window = params.window(layout.window_len)?;
    let frames = layout.frames(samples.len());
    let fft = FftPlanner::new().plan_fft_forward(layout.fft_size);

    let mut out = Array2::zeros((frames, layout.fft_size));
    let mut buf = vec![Complex64::new(0.0, 0.0); layout.fft_size];
    for (t, mut row) in out.rows_mut().into_iter().enumerate() {
        let start = t * layout.hop;
        buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        let frame = &samples[start..start + layout.window_len];
        for (dst, (&x, &w)) in buf.iter_mut().zip(frame.iter().zip(&window)) {
            *dst = x * w;
        }
        fft.process(&mut buf);
        fftshift(&mut buf);
        row.iter_mut().zip(&buf).for_each(|(d, s)| *d = *s);
    }
    Ok(out)
}

/// Default cutoff for slow-time noise suppression: 0.8 of Nyquist.
pub fn default_lowpass_cutoff(sample_rate_hz: f64) -> f64 {
    0.8 * sample_rate_hz / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Biquad {
    b0: f64,
    b1: f64,
    b2: f64,
    a1: f64,
    a2: f64,
}

/// Fourth-order Butterworth low-pass realized as two cascaded biquads,
/// discretized by the bilinear transform with a pre-warped cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct Butterworth4 {
    sections: [Biquad; 2],
}

impl Butterworth4 {
    pub fn design(cutoff_hz: f64, sample_rate_hz: f64) -> Result<Self> {
        check_rate(sample_rate_hz)?;
        let nyquist = sample_rate_hz / 2.0;
        if !(cutoff_hz > 0.0 && cutoff_hz < nyquist) {
            return Err(Error::invalid(format!(
                "cutoff {cutoff_hz} Hz must lie strictly inside (0, {nyquist}) Hz"
            )));
        }
        let k = (PI * cutoff_hz / sample_rate_hz).tan();
        let k2 = k * k;
        // Pole pairs of the 4th-order prototype sit at ±π/8 and ±3π/8 off the
        // negative real axis; Q = 1 / (2 cos θ).
        let section = |theta: f64| {
            let q = 1.0 / (2.0 * theta.cos());
            let norm = 1.0 / (1.0 + k / q + k2);
            let b0 = k2 * norm;
            Biquad {
                b0,
                b1: 2.0 * b0,
                b2: b0,
                a1: 2.0 * (k2 - 1.0) * norm,
                a2: (1.0 - k / q + k2) * norm,
            }
        };
        Ok(Self {
            sections: [section(PI / 8.0), section(3.0 * PI / 8.0)],
        })
    }

    /// Causal single-pass filtering, zero initial state.
    pub fn filter<T>(&self, input: &[T]) -> Vec<T>
    where
        T: Copy + Default + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
    {
        let mut data = input.to_vec();
        for s in &self.sections {
            let (mut z1, mut z2) = (T::default(), T::default());
            for x in data.iter_mut() {
                let y = *x * s.b0 + z1;
                z1 = *x * s.b1 - y * s.a1 + z2;
                z2 = *x * s.b2 - y * s.a2;
                *x = y;
            }
        }
        data
    }
}

pub fn butterworth4_lowpass(signal: &RealSignal, cutoff_hz: f64) -> Result<RealSignal> {
    let filt = Butterworth4::design(cutoff_hz, signal.sample_rate_hz())?;
    RealSignal::new(filt.filter(signal.samples()), signal.sample_rate_hz())
}

pub fn butterworth4_lowpass_complex(
    signal: &ComplexSignal,
    cutoff_hz: f64,
) -> Result<ComplexSignal> {
    let filt = Butterworth4::design(cutoff_hz, signal.sample_rate_hz())?;
    ComplexSignal::new(filt.filter(signal.samples()), signal.sample_rate_hz())
}

/// Shannon entropy in bits of the distribution obtained by normalizing
/// `weights`. `0 · log 0` is taken as 0.
pub fn shannon_entropy(weights: &[f64]) -> Result<f64> {
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::invalid("entropy weights must be finite and non-negative"));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::invalid("entropy needs at least one positive weight"));
    }
    let h = weights
        .iter()
        .filter(|&&w| w > 0.0)
        .map(|&w| {
            let p = w / total;
            -p * p.log2()
        })
        .sum::<f64>();
    Ok(h.max(0.0))
}

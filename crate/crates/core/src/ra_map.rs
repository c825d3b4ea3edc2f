//! Range–angle maps: per-channel range FFT, spatial covariance per range
//! bin, and the Capon (MVDR) spatial spectrum `P(θ) = 1 / (aᴴ R⁻¹ a)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use ndarray::{s, Array2, Array3, ArrayView2, Axis};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cube::IqCube;
use crate::dsp::{make_window, Window};
use crate::error::{Error, Result};

/// Range × angle power map for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RaMap {
    pub power: Array2<f64>,
    pub angle_grid_deg: Vec<f64>,
    pub range_axis_m: Vec<f64>,
    pub frame_index: usize,
}

impl RaMap {
    pub fn new(
        power: Array2<f64>,
        angle_grid_deg: Vec<f64>,
        range_axis_m: Vec<f64>,
        frame_index: usize,
    ) -> Result<Self> {
        let (rows, cols) = power.dim();
        if rows != range_axis_m.len() || cols != angle_grid_deg.len() {
            return Err(Error::invalid(format!(
                "axis lengths ({}, {}) do not match map shape ({rows}, {cols})",
                range_axis_m.len(),
                angle_grid_deg.len()
            )));
        }
        if power.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("RA map power must be finite and non-negative"));
        }
        Ok(Self {
            power,
            angle_grid_deg,
            range_axis_m,
            frame_index,
        })
    }

    /// Map whose axes are plain pixel indices.
    pub fn from_pixels(power: Array2<f64>, frame_index: usize) -> Result<Self> {
        let (rows, cols) = power.dim();
        Self::new(
            power,
            (0..cols).map(|c| c as f64).collect(),
            (0..rows).map(|r| r as f64).collect(),
            frame_index,
        )
    }

    pub fn shape(&self) -> (usize, usize) {
        self.power.dim()
    }
}

/// Hamming-windowed range FFT over fast time for every (channel, chirp).
/// Returns `(channel, chirp, range_bin)` keeping the `N/2` positive bins.
pub fn range_profiles(cube: &IqCube) -> Result<Array3<Complex64>> {
    let (channels, chirps, n) = cube.data().dim();
    let bins = (n / 2).max(1);
    let window = make_window(Window::Hamming, n)?;
    let fft = rustfft::FftPlanner::new().plan_fft_forward(n);
    let mut out = Array3::zeros((channels, chirps, bins));
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for ch in 0..channels {
        for k in 0..chirps {
            let lane = cube.data().slice(s![ch, k, ..]);
            for ((dst, &x), &w) in buf.iter_mut().zip(lane.iter()).zip(&window) {
                *dst = x * w;
            }
            fft.process(&mut buf);
            out.slice_mut(s![ch, k, ..])
                .iter_mut()
                .zip(&buf)
                .for_each(|(d, v)| *d = *v);
        }
    }
    Ok(out)
}

/// Diagonally loaded sample covariance of an `M`-element array.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    pub matrix: DMatrix<Complex64>,
    pub snapshots_used: usize,
    pub diagonal_loading: f64,
}

impl CovarianceEstimate {
    pub fn elements(&self) -> usize {
        self.matrix.nrows()
    }
}

/// `R = (1/K) Σ x_k x_kᴴ + loading · tr(R)/M · I`, with snapshots given as a
/// `K × M` matrix (one row per chirp).
pub fn spatial_covariance(
    snapshots: ArrayView2<Complex64>,
    loading_factor: f64,
) -> Result<CovarianceEstimate> {
    let (k, m) = snapshots.dim();
    if k == 0 || m == 0 {
        return Err(Error::invalid("covariance needs at least one snapshot and one element"));
    }
    if !(loading_factor.is_finite() && loading_factor >= 0.0) {
        return Err(Error::invalid("loading factor must be non-negative"));
    }
    let mut r = DMatrix::<Complex64>::zeros(m, m);
    for x in snapshots.rows() {
        for i in 0..m {
            for j in i..m {
                r[(i, j)] += x[i] * x[j].conj();
            }
        }
    }
    let inv_k = 1.0 / k as f64;
    for i in 0..m {
        for j in i..m {
            r[(i, j)] *= inv_k;
            r[(j, i)] = r[(i, j)].conj();
        }
        r[(i, i)].im = 0.0;
    }
    let trace: f64 = (0..m).map(|i| r[(i, i)].re).sum();
    let loading = loading_factor * trace / m as f64;
    for i in 0..m {
        r[(i, i)] += Complex64::new(loading, 0.0);
    }
    Ok(CovarianceEstimate {
        matrix: r,
        snapshots_used: k,
        diagonal_loading: loading,
    })
}

/// ULA steering vector `a_m = exp(j 2π m d sin θ)`.
pub fn steering_vector(elements: usize, spacing_wavelengths: f64, angle_deg: f64) -> DVector<Complex64> {
    let phase = 2.0 * PI * spacing_wavelengths * angle_deg.to_radians().sin();
    DVector::from_iterator(
        elements,
        (0..elements).map(|m| Complex64::from_polar(1.0, phase * m as f64)),
    )
}

/// Capon spectrum over `angle_grid_deg`, evaluated through a Cholesky
/// factorization `R = L Lᴴ` so that `aᴴ R⁻¹ a = ‖L⁻¹ a‖²`.
pub fn capon_spectrum(
    cov: &CovarianceEstimate,
    angle_grid_deg: &[f64],
    spacing_wavelengths: f64,
) -> Result<Vec<f64>> {
    let m = cov.elements();
    let chol = nalgebra::linalg::Cholesky::new(cov.matrix.clone()).ok_or_else(|| {
        Error::NumericalFailure("covariance is not positive definite".into())
    })?;
    let l = chol.l();
    let diag: Vec<f64> = (0..m).map(|i| l[(i, i)].re).collect();
    let dmax = diag.iter().cloned().fold(0.0, f64::max);
    let dmin = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(dmin > 0.0) || (dmin / dmax).powi(2) < 1e-14 {
        return Err(Error::NumericalFailure(
            "covariance is numerically singular; enable diagonal loading".into(),
        ));
    }
    angle_grid_deg
        .iter()
        .map(|&theta| {
            let a = steering_vector(m, spacing_wavelengths, theta);
            let y = l.solve_lower_triangular(&a).ok_or_else(|| {
                Error::NumericalFailure(format!("triangular solve failed at {theta}°"))
            })?;
            let q = y.norm_squared();
            if q > 0.0 && q.is_finite() {
                Ok(1.0 / q)
            } else {
                Err(Error::NumericalFailure(format!("degenerate quadratic form at {theta}°")))
            }
        })
        .collect()
}

/// −60° … +60° in 1° steps.
pub fn default_angle_grid() -> Vec<f64> {
    (-60..=60).map(f64::from).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RaParams {
    pub angle_grid_deg: Vec<f64>,
    pub loading_factor: f64,
    pub element_spacing_wavelengths: f64,
    /// Subtract the mean chirp per range bin before beamforming.
    pub mti: bool,
}

impl Default for RaParams {
    fn default() -> Self {
        Self {
            angle_grid_deg: default_angle_grid(),
            loading_factor: 1e-3,
            element_spacing_wavelengths: 0.5,
            mti: false,
        }
    }
}

/// One RA map per input cube. Range bins carrying no energy at all map to
/// zero power rather than a singular covariance.
pub fn build_ra_frames(cubes: &[IqCube], params: &RaParams) -> Result<Vec<RaMap>> {
    let Some(first) = cubes.first() else {
        return Ok(Vec::new());
    };
    let shape = first.data().dim();
    if let Some(i) = cubes.iter().position(|c| c.data().dim() != shape) {
        return Err(Error::invalid(format!(
            "cube {i} has shape {:?}, expected {shape:?}",
            cubes[i].data().dim()
        )));
    }
    if params.angle_grid_deg.is_empty() {
        return Err(Error::invalid("angle grid is empty"));
    }
    cubes
        .par_iter()
        .enumerate()
        .map(|(index, cube)| ra_frame(cube, params, index))
        .collect()
}

fn ra_frame(cube: &IqCube, params: &RaParams, frame_index: usize) -> Result<RaMap> {
    let mut profiles = range_profiles(cube)?;
    if params.mti {
        let mean = profiles.mean_axis(Axis(1)).expect("chirp axis is non-empty");
        for mut chirp in profiles.axis_iter_mut(Axis(1)) {
            chirp -= &mean;
        }
    }
    let (_, _, bins) = profiles.dim();
    let mut power = Array2::zeros((bins, params.angle_grid_deg.len()));
    for bin in 0..bins {
        // (channel, chirp) -> (chirp, channel) snapshots
        let snapshots = profiles.slice(s![.., .., bin]).reversed_axes();
        let cov = spatial_covariance(snapshots, params.loading_factor)?;
        let energy: f64 = (0..cov.elements()).map(|i| cov.matrix[(i, i)].re).sum();
        if energy == 0.0 {
            continue;
        }
        let spectrum = capon_spectrum(&cov, &params.angle_grid_deg, params.element_spacing_wavelengths)?;
        power.row_mut(bin).iter_mut().zip(&spectrum).for_each(|(d, v)| *d = *v);
    }
    let range_axis = (0..bins).map(|b| b as f64 * cube.range_resolution_m).collect();
    RaMap::new(power, params.angle_grid_deg.clone(), range_axis, frame_index)
}

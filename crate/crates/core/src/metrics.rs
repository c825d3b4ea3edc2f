//! Full-reference image metrics: MSE, MAE, RMSE, PSNR, Pearson correlation
//! and single-scale SSIM.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::spectrogram::GrayImage;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorMetrics {
    pub mse: f64,
    pub mae: f64,
    pub rmse: f64,
}

fn check_dims(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::invalid(format!(
            "image dimensions differ: {:?} vs {:?}",
            a.dim(),
            b.dim()
        )));
    }
    if a.is_empty() {
        return Err(Error::invalid("images are empty"));
    }
    Ok(())
}

pub fn error_metrics(reference: ArrayView2<f64>, test: ArrayView2<f64>) -> Result<ErrorMetrics> {
    check_dims(reference, test)?;
    let n = reference.len() as f64;
    let (mut se, mut ae) = (0.0, 0.0);
    for (a, b) in reference.iter().zip(test.iter()) {
        let d = a - b;
        se += d * d;
        ae += d.abs();
    }
    let mse = se / n;
    Ok(ErrorMetrics {
        mse,
        mae: ae / n,
        rmse: mse.sqrt(),
    })
}

/// PSNR in dB; identical images yield [`Psnr::Infinite`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psnr {
    Finite(f64),
    Infinite,
}

impl Psnr {
    pub fn from_mse(mse: f64, max_val: f64) -> Self {
        if mse == 0.0 {
            Psnr::Infinite
        } else {
            Psnr::Finite(10.0 * (max_val * max_val / mse).log10())
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Psnr::Finite(v) => v,
            Psnr::Infinite => f64::INFINITY,
        }
    }
}

impl std::fmt::Display for Psnr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Psnr::Finite(v) => write!(f, "{v}"),
            Psnr::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Psnr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Psnr::Finite(v) => s.serialize_f64(*v),
            Psnr::Infinite => s.serialize_str("inf"),
        }
    }
}

pub fn psnr(reference: ArrayView2<f64>, test: ArrayView2<f64>, max_val: f64) -> Result<Psnr> {
    Ok(Psnr::from_mse(error_metrics(reference, test)?.mse, max_val))
}

/// Sample Pearson correlation over the flattened pixels.
pub fn pearson(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<f64> {
    check_dims(a, b)?;
    let n = a.len() as f64;
    let ma = a.sum() / n;
    let mb = b.sum() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b.iter()) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::UndefinedStatistic(
            "Pearson correlation of a constant image".into(),
        ));
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SsimParams {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 255.0,
        }
    }
}

fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let k: Vec<f64> = (0..size)
        .map(|i| (-0.5 * ((i as f64 - c) / sigma).powi(2)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

/// Separable "valid" filtering with a symmetric kernel.
fn filter_valid(img: &Array2<f64>, kernel: &[f64]) -> Array2<f64> {
    let w = kernel.len();
    let (rows, cols) = img.dim();
    let (or, oc) = (rows + 1 - w, cols + 1 - w);
    let mut tmp = Array2::<f64>::zeros((rows, oc));
    for r in 0..rows {
        for c in 0..oc {
            tmp[(r, c)] = (0..w).map(|k| kernel[k] * img[(r, c + k)]).sum();
        }
    }
    let mut out = Array2::<f64>::zeros((or, oc));
    for r in 0..or {
        for c in 0..oc {
            out[(r, c)] = (0..w).map(|k| kernel[k] * tmp[(r + k, c)]).sum();
        }
    }
    out
}

/// Mean SSIM over every fully contained window position.
pub fn ssim(a: ArrayView2<f64>, b: ArrayView2<f64>, params: &SsimParams) -> Result<f64> {
    check_dims(a, b)?;
    let w = params.window;
    let (rows, cols) = a.dim();
    if w == 0 || rows < w || cols < w {
        return Err(Error::invalid(format!(
            "image {rows}×{cols} is smaller than the {w}×{w} SSIM window"
        )));
    }
    let kernel = gaussian_kernel(w, params.sigma);
    let c1 = (params.k1 * params.dynamic_range).powi(2);
    let c2 = (params.k2 * params.dynamic_range).powi(2);
    let a = a.to_owned();
    let b = b.to_owned();
    let mu_a = filter_valid(&a, &kernel);
    let mu_b = filter_valid(&b, &kernel);
    let e_aa = filter_valid(&(&a * &a), &kernel);
    let e_bb = filter_valid(&(&b * &b), &kernel);
    let e_ab = filter_valid(&(&a * &b), &kernel);
    let mut acc = 0.0;
    for i in 0..mu_a.len() {
        let idx = (i / mu_a.ncols(), i % mu_a.ncols());
        let (ma, mb) = (mu_a[idx], mu_b[idx]);
        let va = e_aa[idx] - ma * ma;
        let vb = e_bb[idx] - mb * mb;
        let cov = e_ab[idx] - ma * mb;
        acc += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    Ok((acc / mu_a.len() as f64).clamp(-1.0, 1.0))
}

/// One row of a metric table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricReport {
    pub mse: f64,
    pub mae: f64,
    pub rmse: f64,
    pub psnr_db: Psnr,
    pub identical: bool,
    /// `None` when either image is constant.
    pub pearson: Option<f64>,
    pub ssim: f64,
    pub psnr_max_val: f64,
    pub ssim_window: usize,
    pub ssim_sigma: f64,
}

impl MetricReport {
    pub fn compute(reference: ArrayView2<f64>, test: ArrayView2<f64>, max_val: f64, ssim_params: &SsimParams) -> Result<Self> {
        let e = error_metrics(reference, test)?;
        let pearson = match pearson(reference, test) {
            Ok(v) => Some(v),
            Err(Error::UndefinedStatistic(_)) => None,
            Err(e) => return Err(e),
        };
        let psnr = Psnr::from_mse(e.mse, max_val);
        Ok(Self {
            mse: e.mse,
            mae: e.mae,
            rmse: e.rmse,
            psnr_db: psnr,
            identical: psnr == Psnr::Infinite,
            pearson,
            ssim: ssim(reference, test, ssim_params)?,
            psnr_max_val: max_val,
            ssim_window: ssim_params.window,
            ssim_sigma: ssim_params.sigma,
        })
    }

    /// Metrics between two 8-bit renderings with `L = 255`.
    pub fn between(reference: &GrayImage, test: &GrayImage) -> Result<Self> {
        Self::compute(
            reference.to_f64().view(),
            test.to_f64().view(),
            255.0,
            &SsimParams::default(),
        )
    }
}

mod common;

use nalgebra::DMatrix;
use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;

use radhar::dsp::{dft, idft, make_window, shannon_entropy, stft, ComplexSignal, StftParams, Window};
use radhar::metrics::{psnr, ssim, Psnr, SsimParams};
use radhar::ra_map::{capon_spectrum, steering_vector, CovarianceEstimate};

use common::*;

fn random_signal(rng: &mut rand_chacha::ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

#[test]
fn dft_matches_naive_transform() {
    let mut rng = rng(20);
    for _ in 0..30 {
        let len = rng.random_range(1..90);
        let n = len + rng.random_range(0..40);
        let x = random_signal(&mut rng, len);
        let got = dft(&ComplexSignal::new(x.clone(), 1.0).unwrap(), n).unwrap();
        let want = naive_dft(&x, n);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).norm() < 1e-9, "{a} vs {b}");
        }
    }
}

#[test]
fn parseval_holds() {
    let mut rng = rng(21);
    let x = random_signal(&mut rng, 100);
    let spectrum = dft(&ComplexSignal::new(x.clone(), 1.0).unwrap(), 128).unwrap();
    let time: f64 = x.iter().map(|z| z.norm_sqr()).sum();
    let freq: f64 = spectrum.iter().map(|z| z.norm_sqr()).sum::<f64>() / 128.0;
    assert!((time - freq).abs() < 1e-9 * time);
    let back = idft(&spectrum).unwrap();
    for (a, b) in x.iter().zip(&back) {
        assert!((a - b).norm() < 1e-12);
    }
}

#[test]
fn hamming_window_formula() {
    let w = make_window(Window::Hamming, 9).unwrap();
    for (i, v) in w.iter().enumerate() {
        let want = 0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / 8.0).cos();
        assert!((v - want).abs() < 1e-12);
    }
}

#[test]
fn stft_frames_match_windowed_naive_dft() {
    let mut rng = rng(22);
    let fs = 200.0;
    let params = StftParams::default();
    let layout = params.layout(fs).unwrap();
    let x = random_signal(&mut rng, 300);
    let z = stft(&ComplexSignal::new(x.clone(), fs).unwrap(), &params).unwrap();
    let window = params.window(layout.window_len).unwrap();
    assert_eq!(z.nrows(), layout.frames(x.len()));
    for f in [0, z.nrows() / 2, z.nrows() - 1] {
        let seg: Vec<Complex64> = (0..layout.window_len).map(|i| x[f * layout.hop + i] * window[i]).collect();
        let mut want = naive_dft(&seg, layout.fft_size);
        // zero frequency sits in the middle after the shift
        want.rotate_right(layout.fft_size / 2);
        for (a, b) in z.row(f).iter().zip(&want) {
            assert!((a - b).norm() < 1e-9);
        }
    }
}

#[test]
fn entropy_of_uniform_and_point_masses() {
    assert!((shannon_entropy(&[1.0; 64]).unwrap() - 6.0).abs() < 1e-12);
    assert_eq!(shannon_entropy(&[0.0, 3.0, 0.0]).unwrap(), 0.0);
    let h = shannon_entropy(&[1.0, 1.0, 2.0]).unwrap();
    assert!((h - 1.5).abs() < 1e-12);
}

#[test]
fn capon_matches_explicit_inverse() {
    let mut rng = rng(23);
    for _ in 0..20 {
        let m = rng.random_range(2..6);
        let a = DMatrix::from_fn(m, m, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let r = &a * a.adjoint() + DMatrix::identity(m, m) * Complex64::new(0.1, 0.0);
        let inv = r.clone().try_inverse().unwrap();
        let grid: Vec<f64> = (-60..=60).step_by(7).map(f64::from).collect();
        let cov = CovarianceEstimate {
            matrix: r,
            snapshots_used: 1,
            diagonal_loading: 0.0,
        };
        let got = capon_spectrum(&cov, &grid, 0.5).unwrap();
        for (theta, p) in grid.iter().zip(&got) {
            let s = steering_vector(m, 0.5, *theta);
            let q = (s.adjoint() * &inv * &s)[(0, 0)].re;
            assert!((p - 1.0 / q).abs() < 1e-9 * p.max(1.0));
        }
    }
}

#[test]
fn ssim_of_inverted_checkerboard_is_negative() {
    let a = Array2::from_shape_fn((32, 32), |(r, c)| if (r + c) % 2 == 0 { 255.0 } else { 0.0 });
    let b = a.mapv(|v| 255.0 - v);
    let got = ssim(a.view(), b.view(), &SsimParams::default()).unwrap();
    let want = ssim_oracle(&a, &b, 11, 1.5, 255.0);
    assert!(got < 0.0);
    assert!((got - want).abs() < 1e-9);
}

#[test]
fn psnr_known_value() {
    let a = Array2::<f64>::zeros((4, 4));
    let b = Array2::<f64>::ones((4, 4));
    match psnr(a.view(), b.view(), 255.0).unwrap() {
        Psnr::Finite(v) => assert!((v - 20.0 * 255f64.log10()).abs() < 1e-9),
        Psnr::Infinite => panic!("expected a finite PSNR"),
    }
    assert_eq!(psnr(a.view(), a.view(), 255.0).unwrap(), Psnr::Infinite);
}

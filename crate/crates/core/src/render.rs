//! PGM/PPM panel rendering: spectrogram grids, lump overlays and mask
//! panels.

use ndarray::{Array2, Array3};

use crate::error::{Error, Result};
use crate::quality::Lump;
use crate::ra_map::RaMap;
use crate::spectrogram::GrayImage;

pub const RED: [u8; 3] = [255, 0, 0];
pub const BLUE: [u8; 3] = [0, 96, 255];
pub const GAP_PX: usize = 2;

/// 8-bit RGB raster, shape (rows, cols, 3).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub pixels: Array3<u8>,
}

impl RgbImage {
    pub fn blank(rows: usize, cols: usize) -> Self {
        Self {
            pixels: Array3::zeros((rows, cols, 3)),
        }
    }

    pub fn from_gray(img: &GrayImage) -> Self {
        let (rows, cols) = img.dim();
        Self {
            pixels: Array3::from_shape_fn((rows, cols, 3), |(r, c, _)| img.pixels[(r, c)]),
        }
    }

    pub fn dim(&self) -> (usize, usize) {
        let (r, c, _) = self.pixels.dim();
        (r, c)
    }

    pub fn put(&mut self, r: usize, c: usize, rgb: [u8; 3]) {
        for (k, v) in rgb.into_iter().enumerate() {
            self.pixels[(r, c, k)] = v;
        }
    }

    fn blit(&mut self, src: &RgbImage, r0: usize, c0: usize) {
        let (h, w) = src.dim();
        self.pixels
            .slice_mut(ndarray::s![r0..r0 + h, c0..c0 + w, ..])
            .assign(&src.pixels);
    }
}

/// Linear scaling of `values` to 0..=255 by their maximum. An all-zero
/// input maps to black.
pub fn normalize_to_gray(values: &Array2<f64>) -> GrayImage {
    let max = values.iter().cloned().fold(0.0f64, f64::max);
    let scale = if max > 0.0 { 255.0 / max } else { 0.0 };
    GrayImage::from_pixels(values.mapv(|v| (v.max(0.0) * scale).round().min(255.0) as u8))
}

pub fn frame_to_gray(frame: &RaMap) -> GrayImage {
    normalize_to_gray(&frame.power)
}

/// Tiles same-purpose panels row by row, `cols` per row, on a black
/// background. Panels may differ in size; each cell takes the largest.
pub fn gray_grid(panels: &[GrayImage], cols: usize) -> Result<GrayImage> {
    let rgb: Vec<RgbImage> = panels.iter().map(RgbImage::from_gray).collect();
    let tiled = rgb_grid(&rgb, cols)?;
    Ok(GrayImage::from_pixels(tiled.pixels.index_axis(ndarray::Axis(2), 0).to_owned()))
}

pub fn rgb_grid(panels: &[RgbImage], cols: usize) -> Result<RgbImage> {
    if panels.is_empty() || cols == 0 {
        return Err(Error::invalid("grid needs at least one panel and one column"));
    }
    let cell_h = panels.iter().map(|p| p.dim().0).max().unwrap();
    let cell_w = panels.iter().map(|p| p.dim().1).max().unwrap();
    let rows = panels.len().div_ceil(cols);
    let ncols = cols.min(panels.len());
    let mut out = RgbImage::blank(
        rows * cell_h + (rows - 1) * GAP_PX,
        ncols * cell_w + (ncols - 1) * GAP_PX,
    );
    for (i, p) in panels.iter().enumerate() {
        let (gr, gc) = (i / cols, i % cols);
        out.blit(p, gr * (cell_h + GAP_PX), gc * (cell_w + GAP_PX));
    }
    Ok(out)
}

/// Lump pixels with at least one 4-neighbour outside the lump.
pub fn lump_outline(lump: &Lump) -> Vec<(usize, usize)> {
    let set: std::collections::HashSet<(usize, usize)> = lump.pixels.iter().copied().collect();
    let mut edge: Vec<(usize, usize)> = lump
        .pixels
        .iter()
        .copied()
        .filter(|&(r, c)| {
            r == 0
                || c == 0
                || !set.contains(&(r - 1, c))
                || !set.contains(&(r + 1, c))
                || !set.contains(&(r, c - 1))
                || !set.contains(&(r, c + 1))
        })
        .collect();
    edge.sort_unstable();
    edge
}

/// Grayscale frame with every lump outlined: `chosen` in red, the rest in
/// blue.
pub fn lump_overlay(frame: &RaMap, lumps: &[Lump], chosen: Option<&Lump>) -> RgbImage {
    let mut img = RgbImage::from_gray(&frame_to_gray(frame));
    for l in lumps {
        if chosen.is_some_and(|c| c.pixels == l.pixels) {
            continue;
        }
        for (r, c) in lump_outline(l) {
            img.put(r, c, BLUE);
        }
    }
    if let Some(c) = chosen {
        for (r, cc) in lump_outline(c) {
            img.put(r, cc, RED);
        }
    }
    img
}

/// Rectangle outline for an inclusive bbox, clipped to the image.
pub fn draw_bbox(img: &mut RgbImage, bbox: (usize, usize, usize, usize), rgb: [u8; 3]) {
    let (rows, cols) = img.dim();
    if rows == 0 || cols == 0 {
        return;
    }
    let (r0, c0) = (bbox.0.min(rows - 1), bbox.1.min(cols - 1));
    let (r1, c1) = (bbox.2.min(rows - 1), bbox.3.min(cols - 1));
    for c in c0..=c1 {
        img.put(r0, c, rgb);
        img.put(r1, c, rgb);
    }
    for r in r0..=r1 {
        img.put(r, c0, rgb);
        img.put(r, c1, rgb);
    }
}

/// Four columns: raw frame, frame with the chosen bbox, soft mask weights,
/// hard mask weights.
pub fn mask_panel(
    frame: &RaMap,
    bbox: Option<(usize, usize, usize, usize)>,
    soft: &Array2<f64>,
    hard: &Array2<f64>,
) -> Result<RgbImage> {
    let raw = RgbImage::from_gray(&frame_to_gray(frame));
    let mut boxed = raw.clone();
    if let Some(b) = bbox {
        draw_bbox(&mut boxed, b, RED);
    }
    let weights = |w: &Array2<f64>| RgbImage::from_gray(&GrayImage::from_pixels(w.mapv(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)));
    rgb_grid(&[raw, boxed, weights(soft), weights(hard)], 4)
}

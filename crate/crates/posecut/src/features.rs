//! Gradient-orientation feature grids.
//!
//! The grid covers the image with square cells; each cell holds one
//! histogram of unsigned gradient orientations. Values are block-normalized
//! and clipped so every entry lands in [0, 1].

use thiserror::Error;

use crate::geometry::Camera;

pub const DEFAULT_CELL_PX: u32 = 8;
pub const DEFAULT_ORIENT_BINS: usize = 8;

/// Spatial and orientation layout of a feature grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridLayout {
    pub cols: usize,
    pub rows: usize,
    pub cell_px: u32,
    pub n_orient: usize,
}

impl GridLayout {
    pub fn for_camera(cam: &Camera) -> Self {
        Self::new(cam.width, cam.height, DEFAULT_CELL_PX, DEFAULT_ORIENT_BINS)
    }

    pub fn new(width: u32, height: u32, cell_px: u32, n_orient: usize) -> Self {
        assert!(cell_px > 0 && n_orient > 0);
        Self {
            cols: (width / cell_px) as usize,
            rows: (height / cell_px) as usize,
            cell_px,
            n_orient,
        }
    }

    pub fn n_cells(&self) -> usize {
        self.cols * self.rows
    }

    pub fn n_bins(&self) -> usize {
        self.n_cells() * self.n_orient
    }

    /// Spatial cell of a pixel, `None` outside the gridded area.
    pub fn cell_of_pixel(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        if !(x.is_finite() && y.is_finite()) || x < 0.0 || y < 0.0 {
            return None;
        }
        let u = (x / self.cell_px as f64) as usize;
        let v = (y / self.cell_px as f64) as usize;
        if u < self.cols && v < self.rows {
            Some((u, v))
        } else {
            None
        }
    }

    /// Orientation bin of an unsigned angle. Bins tile [0, 180) from 0, so
    /// with 8 bins the boundaries sit at 0, 22.5, ..., 157.5 and horizontal
    /// edges land in bin 0.
    pub fn orient_bin(&self, theta_deg: f64) -> usize {
        let step = 180.0 / self.n_orient as f64;
        let t = theta_deg.rem_euclid(180.0);
        ((t / step) as usize).min(self.n_orient - 1)
    }

    pub fn bin_width_deg(&self) -> f64 {
        180.0 / self.n_orient as f64
    }

    /// The two orientation bins a gradient at `theta_deg` votes into, with
    /// bilinear weights (summing to 1) by distance to the bin centers. Keeps
    /// histograms stable when an edge sits on a bin boundary.
    pub fn orient_votes(&self, theta_deg: f64) -> [(usize, f64); 2] {
        let n = self.n_orient;
        let t = theta_deg.rem_euclid(180.0) / self.bin_width_deg() - 0.5;
        let k0f = t.floor();
        let frac = t - k0f;
        let k0 = (k0f.rem_euclid(n as f64)) as usize % n;
        [(k0, 1.0 - frac), ((k0 + 1) % n, frac)]
    }

    pub fn flat_index(&self, u: usize, v: usize, w: usize) -> usize {
        (v * self.cols + u) * self.n_orient + w
    }
}

/// A bin index: spatial cell plus orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BinIndex {
    pub u: usize,
    pub v: usize,
    pub w: usize,
}

/// Dense non-negative feature values on a [`GridLayout`].
#[derive(Debug, Clone)]
pub struct FeatureGrid {
    pub layout: GridLayout,
    values: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("image {0}x{1} is smaller than one {2}px feature cell")]
    ImageTooSmall(u32, u32, u32),
}

impl FeatureGrid {
    pub fn zeros(layout: GridLayout) -> Self {
        Self {
            values: vec![0.0; layout.n_bins()],
            layout,
        }
    }

    pub fn get(&self, u: usize, v: usize, w: usize) -> f64 {
        self.values[self.layout.flat_index(u, v, w)]
    }

    pub fn set(&mut self, u: usize, v: usize, w: usize, val: f64) {
        let i = self.layout.flat_index(u, v, w);
        self.values[i] = val;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }
}

const BLOCK_CLIP: f64 = 0.2;

/// Extracts gradient-orientation features: per-cell unsigned orientation
/// histograms of gradient magnitude, L2-normalized over 2x2 cell blocks
/// with clipping, then rescaled into [0, 1].
pub fn extract_features(gray: &GrayImage, layout: GridLayout) -> Result<FeatureGrid, FeatureError> {
    if gray.width < layout.cell_px || gray.height < layout.cell_px {
        return Err(FeatureError::ImageTooSmall(
            gray.width,
            gray.height,
            layout.cell_px,
        ));
    }
    let mut grid = FeatureGrid::zeros(layout);
    let (w, h) = (gray.width as usize, gray.height as usize);
    let cell = layout.cell_px as usize;

    for y in 0..h {
        for x in 0..w {
            let (u, v) = (x / cell, y / cell);
            if u >= layout.cols || v >= layout.rows {
                continue;
            }
            // central differences, clamped at the border
            let gx = gray.at(x.min(w - 2) + 1, y) - gray.at(x.max(1) - 1, y);
            let gy = gray.at(x, y.min(h - 2) + 1) - gray.at(x, y.max(1) - 1);
            let mag = (gx * gx + gy * gy).sqrt();
            if mag <= 1e-12 {
                continue;
            }
            // gradient is normal to the edge; vote by edge orientation
            let theta = gy.atan2(gx).to_degrees() + 90.0;
            for (wbin, weight) in layout.orient_votes(theta) {
                grid.values[layout.flat_index(u, v, wbin)] += mag * weight;
            }
        }
    }

    block_normalize(&mut grid);
    Ok(grid)
}

/// L2 block normalization over 2x2 cell neighborhoods (cells on the last
/// row/column fall back to their own norm), clip, renormalize to [0, 1].
fn block_normalize(grid: &mut FeatureGrid) {
    let lay = grid.layout;
    let mut out = vec![0.0; grid.values.len()];
    for v in 0..lay.rows {
        for u in 0..lay.cols {
            let mut sq = 0.0;
            for dv in 0..2usize {
                for du in 0..2usize {
                    let (bu, bv) = ((u + du).min(lay.cols - 1), (v + dv).min(lay.rows - 1));
                    for w in 0..lay.n_orient {
                        let x = grid.get(bu, bv, w);
                        sq += x * x;
                    }
                }
            }
            let norm = sq.sqrt() + 1e-9;
            for w in 0..lay.n_orient {
                let clipped = (grid.get(u, v, w) / norm).min(BLOCK_CLIP);
                out[lay.flat_index(u, v, w)] = clipped / BLOCK_CLIP;
            }
        }
    }
    grid.values = out;
}

/// Minimal owned grayscale raster with f64 samples in [0, 1].
#[derive(Debug, Clone)]
pub struct GrayImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width as usize * height as usize],
        }
    }

    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width as usize + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width as usize + x] = v;
    }
}

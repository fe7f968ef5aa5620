//! Superpixel partitions and the region adjacency graph.

use image::RgbImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::color::rgb_to_luv;
use crate::hull::ProjectionMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuperpixelMode {
    /// Rectangular blocks; exact and deterministic, used by tests.
    Grid,
    /// k-means in LUV + position with connectivity cleanup.
    Slic,
}

/// A partition of the image into superpixels plus its adjacency graph.
#[derive(Debug, Clone)]
pub struct SuperpixelGraph {
    pub width: u32,
    pub height: u32,
    /// Per-pixel superpixel id, row-major.
    pub labels: Vec<u32>,
    pub sizes: Vec<usize>,
    pub mean_luv: Vec<[f64; 3]>,
    /// Undirected edges (i < j) with shared boundary length in pixel pairs.
    pub edges: Vec<(usize, usize, f64)>,
    pub adjacency: Vec<Vec<(usize, f64)>>,
}

impl SuperpixelGraph {
    pub fn n(&self) -> usize {
        self.sizes.len()
    }

    pub fn n_pixels(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn label_at(&self, x: u32, y: u32) -> usize {
        self.labels[(y * self.width + x) as usize] as usize
    }

    /// Builds the graph from a raw label raster; ids are compacted to
    /// consecutive integers in first-appearance order.
    pub fn from_labels(img: &RgbImage, raw: &[u32]) -> Self {
        let (width, height) = (img.width(), img.height());
        assert_eq!(raw.len(), (width * height) as usize);

        let mut remap = std::collections::HashMap::new();
        let mut labels = Vec::with_capacity(raw.len());
        for &r in raw {
            let next = remap.len() as u32;
            let id = *remap.entry(r).or_insert(next);
            labels.push(id);
        }
        let n = remap.len();

        let mut sizes = vec![0usize; n];
        let mut sums = vec![[0.0; 3]; n];
        for y in 0..height {
            for x in 0..width {
                let i = labels[(y * width + x) as usize] as usize;
                sizes[i] += 1;
                let luv = rgb_to_luv(img.get_pixel(x, y).0);
                for k in 0..3 {
                    sums[i][k] += luv[k];
                }
            }
        }
        let mean_luv: Vec<[f64; 3]> = sums
            .iter()
            .zip(&sizes)
            .map(|(s, &c)| [s[0] / c as f64, s[1] / c as f64, s[2] / c as f64])
            .collect();

        let mut boundary = std::collections::HashMap::new();
        let mut bump = |a: u32, b: u32| {
            if a != b {
                let key = (a.min(b) as usize, a.max(b) as usize);
                *boundary.entry(key).or_insert(0usize) += 1;
            }
        };
        for y in 0..height {
            for x in 0..width {
                let here = labels[(y * width + x) as usize];
                if x + 1 < width {
                    bump(here, labels[(y * width + x + 1) as usize]);
                }
                if y + 1 < height {
                    bump(here, labels[((y + 1) * width + x) as usize]);
                }
            }
        }
        let mut edges: Vec<(usize, usize, f64)> = boundary
            .into_iter()
            .map(|((i, j), c)| (i, j, c as f64))
            .collect();
        edges.sort_by_key(|&(i, j, _)| (i, j));

        let mut adjacency = vec![Vec::new(); n];
        for &(i, j, l) in &edges {
            adjacency[i].push((j, l));
            adjacency[j].push((i, l));
        }

        Self {
            width,
            height,
            labels,
            sizes,
            mean_luv,
            edges,
            adjacency,
        }
    }

    /// Per-superpixel count of pixels covered by the mask.
    pub fn count_inside(&self, mask: &ProjectionMask) -> Vec<usize> {
        assert_eq!((mask.width, mask.height), (self.width, self.height));
        let mut out = vec![0usize; self.n()];
        for y in 0..self.height {
            for x in 0..self.width {
                if mask.get(x as i64, y as i64) {
                    out[self.label_at(x, y)] += 1;
                }
            }
        }
        out
    }

    /// Rasterizes a per-superpixel labeling (`true` = foreground).
    pub fn labeling_mask(&self, fg: &[bool]) -> ProjectionMask {
        assert_eq!(fg.len(), self.n());
        let mut mask = ProjectionMask::empty(self.width, self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                if fg[self.label_at(x, y)] {
                    mask.set(x as i64, y as i64);
                }
            }
        }
        mask
    }

    /// Snaps a pixel mask to superpixels by majority vote.
    pub fn majority_labeling(&self, mask: &ProjectionMask) -> Vec<bool> {
        let inside = self.count_inside(mask);
        inside
            .iter()
            .zip(&self.sizes)
            .map(|(&c, &s)| 2 * c > s)
            .collect()
    }
}

/// Partitions the image into about `target_count` superpixels.
pub fn superpixels(img: &RgbImage, target_count: usize, mode: SuperpixelMode, seed: u64) -> SuperpixelGraph {
    assert!(target_count >= 1);
    let raw = match mode {
        SuperpixelMode::Grid => grid_labels(img.width(), img.height(), target_count),
        SuperpixelMode::Slic => slic_labels(img, target_count, seed),
    };
    SuperpixelGraph::from_labels(img, &raw)
}

fn grid_labels(width: u32, height: u32, target: usize) -> Vec<u32> {
    let aspect = width as f64 / height as f64;
    let cols = ((target as f64 * aspect).sqrt().round() as u32).clamp(1, width);
    let rows = ((target as f64 / cols as f64).round() as u32).clamp(1, height);
    let mut labels = Vec::with_capacity((width * height) as usize);
    for y in 0..height {
        for x in 0..width {
            let cu = (x as u64 * cols as u64 / width as u64) as u32;
            let cv = (y as u64 * rows as u64 / height as u64) as u32;
            labels.push(cv * cols + cu);
        }
    }
    labels
}

fn slic_labels(img: &RgbImage, target: usize, seed: u64) -> Vec<u32> {
    let (width, height) = (img.width(), img.height());
    let n_px = (width * height) as usize;
    let luv: Vec<[f64; 3]> = img.pixels().map(|p| rgb_to_luv(p.0)).collect();

    let spacing = ((n_px as f64 / target as f64).sqrt()).max(2.0);
    let compactness = 10.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // cluster centers (l, u, v, x, y) seeded on a jittered grid
    let mut centers = Vec::new();
    let mut gy = spacing / 2.0;
    while gy < height as f64 {
        let mut gx = spacing / 2.0;
        while gx < width as f64 {
            let x = (gx + rng.gen_range(-1.0..1.0)).clamp(0.0, width as f64 - 1.0);
            let y = (gy + rng.gen_range(-1.0..1.0)).clamp(0.0, height as f64 - 1.0);
            let c = luv[(y as u32 * width + x as u32) as usize];
            centers.push([c[0], c[1], c[2], x, y]);
            gx += spacing;
        }
        gy += spacing;
    }
    if centers.is_empty() {
        return vec![0; n_px];
    }

    let mut assign = vec![0u32; n_px];
    let mut best = vec![f64::INFINITY; n_px];
    for _iter in 0..10 {
        best.fill(f64::INFINITY);
        for (ci, c) in centers.iter().enumerate() {
            let x0 = (c[3] - 2.0 * spacing).max(0.0) as u32;
            let x1 = ((c[3] + 2.0 * spacing) as u32).min(width - 1);
            let y0 = (c[4] - 2.0 * spacing).max(0.0) as u32;
            let y1 = ((c[4] + 2.0 * spacing) as u32).min(height - 1);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let i = (y * width + x) as usize;
                    let p = luv[i];
                    let dc = (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2) + (p[2] - c[2]).powi(2);
                    let ds = (x as f64 - c[3]).powi(2) + (y as f64 - c[4]).powi(2);
                    let d = dc + ds * (compactness / spacing).powi(2);
                    if d < best[i] {
                        best[i] = d;
                        assign[i] = ci as u32;
                    }
                }
            }
        }
        let mut acc = vec![[0.0f64; 5]; centers.len()];
        let mut cnt = vec![0usize; centers.len()];
        for y in 0..height {
            for x in 0..width {
                let i = (y * width + x) as usize;
                let c = assign[i] as usize;
                let p = luv[i];
                acc[c][0] += p[0];
                acc[c][1] += p[1];
                acc[c][2] += p[2];
                acc[c][3] += x as f64;
                acc[c][4] += y as f64;
                cnt[c] += 1;
            }
        }
        for (c, (a, &k)) in centers.iter_mut().zip(acc.iter().zip(&cnt)) {
            if k > 0 {
                for t in 0..5 {
                    c[t] = a[t] / k as f64;
                }
            }
        }
    }

    enforce_connectivity(&assign, width, height, (spacing * spacing / 4.0) as usize)
}

/// Relabels connected components; components smaller than `min_size` merge
/// into the previously visited neighbor.
fn enforce_connectivity(assign: &[u32], width: u32, height: u32, min_size: usize) -> Vec<u32> {
    let n_px = (width * height) as usize;
    let mut out = vec![u32::MAX; n_px];
    let mut next = 0u32;
    let mut stack = Vec::new();
    for start in 0..n_px {
        if out[start] != u32::MAX {
            continue;
        }
        // neighbor component seen before this one, for small-region merging
        let mut adjacent_label = None;
        let mut component = vec![start];
        out[start] = next;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (x, y) = ((i as u32 % width) as i64, (i as u32 / width) as i64);
            for (dx, dy) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= width as i64 || ny >= height as i64 {
                    continue;
                }
                let j = (ny as u32 * width + nx as u32) as usize;
                if out[j] == u32::MAX && assign[j] == assign[i] {
                    out[j] = next;
                    component.push(j);
                    stack.push(j);
                } else if out[j] != u32::MAX && out[j] != next {
                    adjacent_label = Some(out[j]);
                }
            }
        }
        if component.len() < min_size {
            if let Some(l) = adjacent_label {
                for &i in &component {
                    out[i] = l;
                }
                continue;
            }
        }
        next += 1;
    }
    out
}

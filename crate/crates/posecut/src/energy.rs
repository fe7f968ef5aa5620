//! The CRF energy: bottom-up unary and pairwise terms plus model-driven
//! shape and volume terms, with the per-superpixel decomposition that makes
//! exact min-cut inference possible.
//!
//! With weights w = (w1..w5) and labeling X over superpixels,
//!
//! ```text
//! E(X, T) = w1 sum_i phi_i(x_i) + w2 sum_ij psi_ij [x_i != x_j]
//!         - w3 f_seg(X, T) - w4 |X ∩ pi(T)| - w5 |X^c ∩ pi(T)^c|
//! ```
//!
//!equals `w · Psi(X, T)` exactly, where `Psi` is the feature vector.

use std::path::Path;

use image::RgbImage;
use thiserror::Error;

use crate::color::luv_distance;
use crate::color_model::{superpixel_unaries, ColorModel};
use crate::features::{extract_features, FeatureGrid, GrayImage, GridLayout};
use crate::geometry::{Camera, Frame, Pose};
use crate::hull::{projection_hull, ProjectionMask};
use crate::superpixels::{superpixels, SuperpixelGraph, SuperpixelMode};
use crate::wireframe::{project_to_bin, visibility, WireframeModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Shape,
    Volume,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Shape => "shape",
            ModelKind::Volume => "volume",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyWeights {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub w4: f64,
    pub w5: f64,
    pub kind: ModelKind,
}

#[derive(Debug, Error)]
pub enum WeightsError {
    #[error("weight {0} is negative ({1})")]
    Negative(&'static str, f64),
    #[error("shape model requires w4 = w5 = 0, got w4={0} w5={1}")]
    ShapeVolumeWeights(f64, f64),
    #[error("weights file is missing field {0:?}")]
    Missing(&'static str),
    #[error("weights file has malformed line {0:?}")]
    BadLine(String),
    #[error("unknown modelKind {0:?} (expected shape or volume)")]
    BadKind(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl EnergyWeights {
    pub fn new(kind: ModelKind, w: [f64; 5]) -> Result<Self, WeightsError> {
        for (name, val) in ["w1", "w2", "w3", "w4", "w5"].iter().zip(w) {
            if val < 0.0 {
                return Err(WeightsError::Negative(name, val));
            }
        }
        if kind == ModelKind::Shape && (w[3] != 0.0 || w[4] != 0.0) {
            return Err(WeightsError::ShapeVolumeWeights(w[3], w[4]));
        }
        Ok(Self {
            w1: w[0],
            w2: w[1],
            w3: w[2],
            w4: w[3],
            w5: w[4],
            kind,
        })
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.w1, self.w2, self.w3, self.w4, self.w5]
    }

    pub fn dot(&self, psi: &Psi) -> f64 {
        self.as_array()
            .iter()
            .zip(psi.0)
            .map(|(w, p)| w * p)
            .sum()
    }

    pub fn save(&self, path: &Path) -> Result<(), WeightsError> {
        let mut s = String::new();
        for (name, val) in ["w1", "w2", "w3", "w4", "w5"].iter().zip(self.as_array()) {
            s.push_str(&format!("{name} {val}\n"));
        }
        s.push_str(&format!("modelKind {}\n", self.kind.as_str()));
        std::fs::write(path, s)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, WeightsError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self, WeightsError> {
        let mut w = [None; 5];
        let mut kind = None;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (name, val) = line
                .split_once(char::is_whitespace)
                .ok_or_else(|| WeightsError::BadLine(line.to_string()))?;
            match name {
                "w1" | "w2" | "w3" | "w4" | "w5" => {
                    let idx = name[1..].parse::<usize>().unwrap() - 1;
                    w[idx] = Some(
                        val.trim()
                            .parse::<f64>()
                            .map_err(|_| WeightsError::BadLine(line.to_string()))?,
                    );
                }
                "modelKind" => {
                    kind = Some(match val.trim() {
                        "shape" => ModelKind::Shape,
                        "volume" => ModelKind::Volume,
                        other => return Err(WeightsError::BadKind(other.to_string())),
                    });
                }
                _ => return Err(WeightsError::BadLine(line.to_string())),
            }
        }
        let names = ["w1", "w2", "w3", "w4", "w5"];
        let mut vals = [0.0; 5];
        for i in 0..5 {
            vals[i] = w[i].ok_or(WeightsError::Missing(names[i]))?;
        }
        Self::new(kind.ok_or(WeightsError::Missing("modelKind"))?, vals)
    }
}

/// Per-superpixel binary labeling; `true` assigns the object label.
pub type Segmentation = Vec<bool>;

/// Feature vector `(sum phi, sum psi, -f_seg, -|X∩pi|, -|X^c∩pi^c|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Psi(pub [f64; 5]);

impl Psi {
    pub fn zeros() -> Self {
        Psi([0.0; 5])
    }

    pub fn sub(&self, o: &Psi) -> Psi {
        let mut out = [0.0; 5];
        for i in 0..5 {
            out[i] = self.0[i] - o.0[i];
        }
        Psi(out)
    }

    pub fn add(&self, o: &Psi) -> Psi {
        let mut out = [0.0; 5];
        for i in 0..5 {
            out[i] = self.0[i] + o.0[i];
        }
        Psi(out)
    }

    pub fn scale(&self, s: f64) -> Psi {
        Psi(self.0.map(|x| x * s))
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum()
    }
}

/// Pairwise coefficient: boundary length attenuated by color contrast.
pub fn pairwise_coeff(boundary_len: f64, color_dist: f64, gamma: f64) -> f64 {
    boundary_len / (1.0 + gamma * color_dist)
}

/// Everything frozen about one image that energy evaluation needs.
#[derive(Debug, Clone)]
pub struct SceneData {
    pub cam: Camera,
    pub layout: GridLayout,
    pub grid: FeatureGrid,
    pub graph: SuperpixelGraph,
    /// Per superpixel `(phi(bg), phi(fg))`.
    pub unaries: Vec<(f64, f64)>,
    /// Pairwise coefficients aligned with `graph.edges`.
    pub pairwise: Vec<(usize, usize, f64)>,
    pub gamma: f64,
    pub model: WireframeModel,
}

#[derive(Debug, Clone, Copy)]
pub struct SceneOptions {
    pub superpixel_target: usize,
    pub superpixel_mode: SuperpixelMode,
    pub seed: u64,
}

impl Default for SceneOptions {
    fn default() -> Self {
        Self {
            superpixel_target: 450,
            superpixel_mode: SuperpixelMode::Slic,
            seed: 0,
        }
    }
}

pub fn to_gray(img: &RgbImage) -> GrayImage {
    let mut g = GrayImage::new(img.width(), img.height());
    for (x, y, p) in img.enumerate_pixels() {
        let [r, gg, b] = p.0;
        let y_val = (0.299 * r as f64 + 0.587 * gg as f64 + 0.114 * b as f64) / 255.0;
        g.set(x as usize, y as usize, y_val);
    }
    g
}

impl SceneData {
    pub fn build(
        img: &RgbImage,
        model: WireframeModel,
        colors: &ColorModel,
        opts: SceneOptions,
    ) -> Result<Self, crate::features::FeatureError> {
        let cam = Camera::new(img.width(), img.height());
        let layout = GridLayout::for_camera(&cam);
        let grid = extract_features(&to_gray(img), layout)?;
        let graph = superpixels(img, opts.superpixel_target, opts.superpixel_mode, opts.seed);
        let unaries = superpixel_unaries(img, &graph, colors);
        let (pairwise, gamma) = contrast_pairwise(&graph);
        Ok(Self {
            cam,
            layout,
            grid,
            graph,
            unaries,
            pairwise,
            gamma,
            model,
        })
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn n_pixels(&self) -> f64 {
        self.graph.n_pixels() as f64
    }

    /// Per-superpixel shape sums: H2(i) is the total masked feature value
    /// of visible primitives whose projected pixel falls in superpixel i.
    pub fn h2(&self, pose: &Pose) -> Vec<f64> {
        let frame = Frame::new(pose, &self.cam);
        let mut h2 = vec![0.0; self.n()];
        for pr in &self.model.primitives {
            if !visibility(pr, &frame) {
                continue;
            }
            let Some(bin) = project_to_bin(pr, &frame, &self.layout) else {
                continue;
            };
            let Some([px, py]) = frame.project(pr.p) else {
                continue;
            };
            if px < 0.0 || py < 0.0 || px >= self.cam.width as f64 || py >= self.cam.height as f64 {
                continue;
            }
            let sp = self.graph.label_at(px as u32, py as u32);
            h2[sp] += self.grid.get(bin.u, bin.v, bin.w);
        }
        h2
    }

    /// Shape score via the per-superpixel decomposition.
    pub fn f_seg(&self, x: &Segmentation, pose: &Pose) -> f64 {
        self.h2(pose)
            .iter()
            .zip(x)
            .filter(|(_, &fg)| fg)
            .map(|(h, _)| h)
            .sum()
    }

    /// Shape score evaluated directly, primitive by primitive.
    pub fn f_seg_direct(&self, x: &Segmentation, pose: &Pose) -> f64 {
        let frame = Frame::new(pose, &self.cam);
        let mut total = 0.0;
        for pr in &self.model.primitives {
            if !visibility(pr, &frame) {
                continue;
            }
            let Some(bin) = project_to_bin(pr, &frame, &self.layout) else {
                continue;
            };
            let Some([px, py]) = frame.project(pr.p) else {
                continue;
            };
            if px < 0.0 || py < 0.0 || px >= self.cam.width as f64 || py >= self.cam.height as f64 {
                continue;
            }
            if x[self.graph.label_at(px as u32, py as u32)] {
                total += self.grid.get(bin.u, bin.v, bin.w);
            }
        }
        total
    }

    /// Detection score: shape score with every superpixel labeled object.
    pub fn f_det(&self, pose: &Pose) -> f64 {
        self.h2(pose).iter().sum()
    }

    pub fn hull_mask(&self, pose: &Pose) -> ProjectionMask {
        projection_hull(&self.model, pose, &self.cam)
    }

    /// `(|X ∩ pi|, |X^c ∩ pi^c|)` through the per-superpixel counts.
    pub fn volume_overlaps(&self, x: &Segmentation, pose: &Pose) -> (f64, f64) {
        self.volume_overlaps_with_mask(x, &self.hull_mask(pose))
    }

    pub fn volume_overlaps_with_mask(&self, x: &Segmentation, pi: &ProjectionMask) -> (f64, f64) {
        let inside = self.graph.count_inside(pi);
        let mut fg_overlap = 0.0;
        let mut bg_overlap = 0.0;
        for i in 0..self.n() {
            if x[i] {
                fg_overlap += inside[i] as f64;
            } else {
                bg_overlap += (self.graph.sizes[i] - inside[i]) as f64;
            }
        }
        (fg_overlap, bg_overlap)
    }

    /// Same overlaps counted pixel by pixel on rasterized masks.
    pub fn volume_overlaps_direct(&self, x: &Segmentation, pose: &Pose) -> (f64, f64) {
        let pi = self.hull_mask(pose);
        let xm = self.graph.labeling_mask(x);
        let mut fg_overlap = 0usize;
        let mut bg_overlap = 0usize;
        for y in 0..self.graph.height as i64 {
            for xx in 0..self.graph.width as i64 {
                match (xm.get(xx, y), pi.get(xx, y)) {
                    (true, true) => fg_overlap += 1,
                    (false, false) => bg_overlap += 1,
                    _ => {}
                }
            }
        }
        (fg_overlap as f64, bg_overlap as f64)
    }

    pub fn sum_unary(&self, x: &Segmentation) -> f64 {
        self.unaries
            .iter()
            .zip(x)
            .map(|(&(bg, fg), &l)| if l { fg } else { bg })
            .sum()
    }

    pub fn sum_pairwise(&self, x: &Segmentation) -> f64 {
        self.pairwise
            .iter()
            .filter(|&&(i, j, _)| x[i] != x[j])
            .map(|&(_, _, c)| c)
            .sum()
    }

    pub fn feature_vector(&self, x: &Segmentation, pose: &Pose) -> Psi {
        let (fg_overlap, bg_overlap) = self.volume_overlaps(x, pose);
        Psi([
            self.sum_unary(x),
            self.sum_pairwise(x),
            -self.f_seg(x, pose),
            -fg_overlap,
            -bg_overlap,
        ])
    }

    pub fn total_energy(&self, x: &Segmentation, pose: &Pose, w: &EnergyWeights) -> f64 {
        w.dot(&self.feature_vector(x, pose))
    }

    /// Per-superpixel `(cost_bg, cost_fg)` and pairwise capacities of the
    /// decomposed energy at a fixed pose; `None` drops the top-down terms
    /// (pure bottom-up model). Minimizing the cut energy over labelings
    /// equals minimizing `total_energy` at that pose.
    pub fn cut_costs(&self, pose: Option<&Pose>, w: &EnergyWeights) -> CutProblem {
        let mut unary: Vec<(f64, f64)> = self
            .unaries
            .iter()
            .map(|&(bg, fg)| (w.w1 * bg, w.w1 * fg))
            .collect();
        if let Some(t) = pose {
            if w.w3 != 0.0 {
                for (u, h) in unary.iter_mut().zip(self.h2(t)) {
                    u.1 -= w.w3 * h;
                }
            }
            if w.w4 != 0.0 || w.w5 != 0.0 {
                let inside = self.graph.count_inside(&self.hull_mask(t));
                for (i, u) in unary.iter_mut().enumerate() {
                    u.1 -= w.w4 * inside[i] as f64;
                    u.0 -= w.w5 * (self.graph.sizes[i] - inside[i]) as f64;
                }
            }
        }
        let edges = self
            .pairwise
            .iter()
            .map(|&(i, j, c)| (i, j, w.w2 * c))
            .collect();
        CutProblem { unary, edges }
    }
}

/// A decomposed binary labeling problem ready for min-cut.
#[derive(Debug, Clone)]
pub struct CutProblem {
    /// `(cost if background, cost if foreground)` per node.
    pub unary: Vec<(f64, f64)>,
    /// `(i, j, cost if labels differ)`, cost must be non-negative.
    pub edges: Vec<(usize, usize, f64)>,
}

impl CutProblem {
    pub fn energy_of(&self, x: &[bool]) -> f64 {
        let mut e = 0.0;
        for (i, &(bg, fg)) in self.unary.iter().enumerate() {
            e += if x[i] { fg } else { bg };
        }
        for &(i, j, c) in &self.edges {
            if x[i] != x[j] {
                e += c;
            }
        }
        e
    }
}

fn contrast_pairwise(graph: &SuperpixelGraph) -> (Vec<(usize, usize, f64)>, f64) {
    let mut dists = Vec::with_capacity(graph.edges.len());
    for &(i, j, _) in &graph.edges {
        dists.push(luv_distance(graph.mean_luv[i], graph.mean_luv[j]));
    }
    let mean = if dists.is_empty() {
        0.0
    } else {
        dists.iter().sum::<f64>() / dists.len() as f64
    };
    let gamma = if mean > 1e-9 { 1.0 / mean } else { 1.0 };
    let edges = graph
        .edges
        .iter()
        .zip(&dists)
        .map(|(&(i, j, l), &d)| (i, j, pairwise_coeff(l, d, gamma)))
        .collect();
    (edges, gamma)
}

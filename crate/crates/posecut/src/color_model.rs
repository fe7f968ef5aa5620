//! Bottom-up unary potentials from per-image foreground/background color
//! models: diagonal Gaussian mixtures in LUV, seeded from a hint box or a
//! ground-truth mask.

use image::RgbImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::color::rgb_to_luv;
use crate::hull::ProjectionMask;
use crate::superpixels::SuperpixelGraph;

const K: usize = 3;
const VAR_FLOOR: f64 = 4.0;

#[derive(Debug, Clone)]
struct Component {
    weight: f64,
    mean: [f64; 3],
    var: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct Gmm {
    comps: Vec<Component>,
}

impl Gmm {
    /// k-means clustering followed by per-cluster moment fits.
    fn fit(samples: &[[f64; 3]], seed: u64) -> Self {
        let k = K.min(samples.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut centers: Vec<[f64; 3]> = (0..k)
            .map(|_| samples[rng.gen_range(0..samples.len())])
            .collect();
        let mut assign = vec![0usize; samples.len()];
        for _ in 0..12 {
            for (i, s) in samples.iter().enumerate() {
                let mut best = (f64::INFINITY, 0);
                for (c, center) in centers.iter().enumerate() {
                    let d: f64 = (0..3).map(|t| (s[t] - center[t]).powi(2)).sum();
                    if d < best.0 {
                        best = (d, c);
                    }
                }
                assign[i] = best.1;
            }
            let mut sums = vec![[0.0; 3]; k];
            let mut counts = vec![0usize; k];
            for (i, s) in samples.iter().enumerate() {
                counts[assign[i]] += 1;
                for t in 0..3 {
                    sums[assign[i]][t] += s[t];
                }
            }
            for c in 0..k {
                if counts[c] > 0 {
                    for t in 0..3 {
                        centers[c][t] = sums[c][t] / counts[c] as f64;
                    }
                } else {
                    centers[c] = samples[rng.gen_range(0..samples.len())];
                }
            }
        }

        let mut comps = Vec::with_capacity(k);
        for c in 0..k {
            let members: Vec<&[f64; 3]> = samples
                .iter()
                .enumerate()
                .filter(|(i, _)| assign[*i] == c)
                .map(|(_, s)| s)
                .collect();
            if members.is_empty() {
                continue;
            }
            let n = members.len() as f64;
            let mut mean = [0.0; 3];
            for s in &members {
                for t in 0..3 {
                    mean[t] += s[t] / n;
                }
            }
            let mut var = [0.0; 3];
            for s in &members {
                for t in 0..3 {
                    var[t] += (s[t] - mean[t]).powi(2) / n;
                }
            }
            for v in &mut var {
                *v = v.max(VAR_FLOOR);
            }
            comps.push(Component {
                weight: n / samples.len() as f64,
                mean,
                var,
            });
        }
        Gmm { comps }
    }

    pub fn log_pdf(&self, x: [f64; 3]) -> f64 {
        let mut terms = Vec::with_capacity(self.comps.len());
        for c in &self.comps {
            let mut lp = c.weight.ln();
            for t in 0..3 {
                let d = x[t] - c.mean[t];
                lp += -0.5 * d * d / c.var[t] - 0.5 * (2.0 * std::f64::consts::PI * c.var[t]).ln();
            }
            terms.push(lp);
        }
        let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
    }
}

#[derive(Debug, Clone)]
pub struct ColorModel {
    fg: Gmm,
    bg: Gmm,
}

#[derive(Debug, Error)]
pub enum ColorModelError {
    #[error("cannot train color model: {0} has no pixels")]
    NoSamples(&'static str),
}

/// Axis-aligned pixel rectangle, `x y w h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HintBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl HintBox {
    pub fn contains(&self, px: f64, py: f64) -> bool {
        px >= self.x && py >= self.y && px < self.x + self.w && py < self.y + self.h
    }

    pub fn center(&self) -> [f64; 2] {
        [self.x + self.w / 2.0, self.y + self.h / 2.0]
    }

    pub fn iou(&self, o: &HintBox) -> f64 {
        let ix = (self.x + self.w).min(o.x + o.w) - self.x.max(o.x);
        let iy = (self.y + self.h).min(o.y + o.h) - self.y.max(o.y);
        if ix <= 0.0 || iy <= 0.0 {
            return 0.0;
        }
        let inter = ix * iy;
        inter / (self.w * self.h + o.w * o.h - inter)
    }

    pub fn parse(s: &str) -> Option<Self> {
        let v: Vec<f64> = s
            .split_whitespace()
            .map(|t| t.parse().ok())
            .collect::<Option<_>>()?;
        if v.len() != 4 || v[2] <= 0.0 || v[3] <= 0.0 {
            return None;
        }
        Some(Self {
            x: v[0],
            y: v[1],
            w: v[2],
            h: v[3],
        })
    }

    /// Tight bounding box of a mask's set pixels.
    pub fn of_mask(mask: &ProjectionMask) -> Option<Self> {
        let (mut x0, mut y0) = (i64::MAX, i64::MAX);
        let (mut x1, mut y1) = (i64::MIN, i64::MIN);
        for y in 0..mask.height as i64 {
            for x in 0..mask.width as i64 {
                if mask.get(x, y) {
                    x0 = x0.min(x);
                    y0 = y0.min(y);
                    x1 = x1.max(x);
                    y1 = y1.max(y);
                }
            }
        }
        if x0 > x1 {
            return None;
        }
        Some(Self {
            x: x0 as f64,
            y: y0 as f64,
            w: (x1 - x0 + 1) as f64,
            h: (y1 - y0 + 1) as f64,
        })
    }
}

impl ColorModel {
    /// Trains foreground on mask pixels and background on the rest.
    pub fn train_from_mask(
        img: &RgbImage,
        mask: &ProjectionMask,
        seed: u64,
    ) -> Result<Self, ColorModelError> {
        let mut fg = Vec::new();
        let mut bg = Vec::new();
        for y in 0..img.height() {
            for x in 0..img.width() {
                let luv = rgb_to_luv(img.get_pixel(x, y).0);
                if mask.get(x as i64, y as i64) {
                    fg.push(luv);
                } else {
                    bg.push(luv);
                }
            }
        }
        Self::train(&fg, &bg, seed)
    }

    /// Trains foreground inside the hint box, background outside it.
    pub fn train_from_hint(
        img: &RgbImage,
        hint: &HintBox,
        seed: u64,
    ) -> Result<Self, ColorModelError> {
        let mut fg = Vec::new();
        let mut bg = Vec::new();
        for y in 0..img.height() {
            for x in 0..img.width() {
                let luv = rgb_to_luv(img.get_pixel(x, y).0);
                if hint.contains(x as f64, y as f64) {
                    fg.push(luv);
                } else {
                    bg.push(luv);
                }
            }
        }
        Self::train(&fg, &bg, seed)
    }

    fn train(fg: &[[f64; 3]], bg: &[[f64; 3]], seed: u64) -> Result<Self, ColorModelError> {
        if fg.is_empty() {
            return Err(ColorModelError::NoSamples("foreground"));
        }
        if bg.is_empty() {
            return Err(ColorModelError::NoSamples("background"));
        }
        Ok(Self {
            fg: Gmm::fit(fg, seed),
            bg: Gmm::fit(bg, seed.wrapping_add(1)),
        })
    }

    /// Per-pixel label costs: negative log posterior under equal priors,
    /// `(cost_bg, cost_fg)`.
    pub fn pixel_costs(&self, luv: [f64; 3]) -> (f64, f64) {
        let lf = self.fg.log_pdf(luv);
        let lb = self.bg.log_pdf(luv);
        // -log p(label | x) via a stable two-way softmax
        let m = lf.max(lb);
        let logz = m + ((lf - m).exp() + (lb - m).exp()).ln();
        (logz - lb, logz - lf)
    }
}

/// Mean label costs per superpixel: element i is `(phi_i(bg), phi_i(fg))`.
pub fn superpixel_unaries(
    img: &RgbImage,
    graph: &SuperpixelGraph,
    model: &ColorModel,
) -> Vec<(f64, f64)> {
    let mut acc = vec![(0.0, 0.0); graph.n()];
    for y in 0..img.height() {
        for x in 0..img.width() {
            let (cb, cf) = model.pixel_costs(rgb_to_luv(img.get_pixel(x, y).0));
            let i = graph.label_at(x, y);
            acc[i].0 += cb;
            acc[i].1 += cf;
        }
    }
    for (a, &s) in acc.iter_mut().zip(&graph.sizes) {
        a.0 /= s as f64;
        a.1 /= s as f64;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::superpixels::{superpixels, SuperpixelMode};

    fn two_tone_image() -> (RgbImage, ProjectionMask) {
        let mut img = RgbImage::from_pixel(60, 40, image::Rgb([30, 40, 200]));
        let mut mask = ProjectionMask::empty(60, 40);
        for y in 10..30 {
            for x in 20..40 {
                img.put_pixel(x, y, image::Rgb([220, 120, 40]));
                mask.set(x as i64, y as i64);
            }
        }
        (img, mask)
    }

    #[test]
    fn matching_color_prefers_foreground() {
        let (img, mask) = two_tone_image();
        let model = ColorModel::train_from_mask(&img, &mask, 3).unwrap();
        let (cb_fg, cf_fg) = model.pixel_costs(rgb_to_luv([220, 120, 40]));
        assert!(cf_fg < cb_fg);
        let (cb_bg, cf_bg) = model.pixel_costs(rgb_to_luv([30, 40, 200]));
        assert!(cb_bg < cf_bg);
    }

    #[test]
    fn equal_likelihood_gives_equal_costs() {
        let (img, mask) = two_tone_image();
        let model = ColorModel {
            fg: Gmm::fit(&[[50.0, 0.0, 0.0]], 0),
            bg: Gmm::fit(&[[50.0, 0.0, 0.0]], 0),
        };
        let _ = (img, mask);
        let (cb, cf) = model.pixel_costs([10.0, 5.0, -3.0]);
        assert!((cb - cf).abs() < 1e-12);
        assert!((cb - std::f64::consts::LN_2).abs() < 1e-9);
    }

    #[test]
    fn empty_foreground_is_an_error() {
        let img = RgbImage::from_pixel(20, 20, image::Rgb([9, 9, 9]));
        let mask = ProjectionMask::empty(20, 20);
        assert!(ColorModel::train_from_mask(&img, &mask, 0).is_err());
    }

    #[test]
    fn superpixel_unary_argmin_matches_regions() {
        let (img, mask) = two_tone_image();
        let model = ColorModel::train_from_mask(&img, &mask, 3).unwrap();
        let graph = superpixels(&img, 24, SuperpixelMode::Grid, 0);
        let phis = superpixel_unaries(&img, &graph, &model);
        let truth = graph.majority_labeling(&mask);
        let mut agree = 0;
        for (i, &(cb, cf)) in phis.iter().enumerate() {
            // skip straddling superpixels where either answer is defensible
            let frac = graph.count_inside(&mask)[i] as f64 / graph.sizes[i] as f64;
            if !(0.25..=0.75).contains(&frac) && ((cf < cb) == truth[i]) {
                agree += 1;
            } else if (0.25..=0.75).contains(&frac) {
                agree += 1;
            }
        }
        assert_eq!(agree, graph.n());
    }

    #[test]
    fn hint_box_parse_and_iou() {
        let b = HintBox::parse("10 20 30 40").unwrap();
        assert_eq!((b.x, b.y, b.w, b.h), (10.0, 20.0, 30.0, 40.0));
        assert!(HintBox::parse("1 2 3").is_none());
        assert!(HintBox::parse("1 2 -3 4").is_none());
        let same = b.iou(&b);
        assert!((same - 1.0).abs() < 1e-12);
        let shifted = HintBox {
            x: 25.0,
            ..b
        };
        assert!(b.iou(&shifted) < 1.0 && b.iou(&shifted) > 0.0);
        let far = HintBox {
            x: 1000.0,
            ..b
        };
        assert_eq!(b.iou(&far), 0.0);
    }

    #[test]
    fn mask_bbox_is_tight() {
        let (_, mask) = two_tone_image();
        let b = HintBox::of_mask(&mask).unwrap();
        assert_eq!((b.x, b.y, b.w, b.h), (20.0, 10.0, 20.0, 20.0));
        assert!(HintBox::of_mask(&ProjectionMask::empty(5, 5)).is_none());
    }
}

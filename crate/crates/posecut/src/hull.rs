//! Projected model hulls: alpha-shape of the visible projected primitives,
//! rasterized into a binary mask.

use delaunator::{triangulate, Point};

use crate::geometry::{Camera, Frame, Pose};
use crate::wireframe::{visibility, WireframeModel};

/// Binary pixel raster, same convention as image masks: `true` = covered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectionMask {
    pub width: u32,
    pub height: u32,
    bits: Vec<bool>,
}

impl ProjectionMask {
    pub fn empty(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    pub fn area(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn get(&self, x: i64, y: i64) -> bool {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return false;
        }
        self.bits[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: i64, y: i64) {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return;
        }
        self.bits[y as usize * self.width as usize + x as usize] = true;
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.bits
    }

    /// Grayscale view: covered pixels are 255, background 0.
    pub fn to_gray_image(&self) -> image::GrayImage {
        let mut img = image::GrayImage::new(self.width, self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                let v = if self.get(x as i64, y as i64) { 255 } else { 0 };
                img.put_pixel(x, y, image::Luma([v]));
            }
        }
        img
    }

    /// Reads a mask from a grayscale image: pixels >= 128 are covered.
    pub fn from_gray_image(img: &image::GrayImage) -> Self {
        let mut mask = Self::empty(img.width(), img.height());
        for y in 0..img.height() {
            for x in 0..img.width() {
                if img.get_pixel(x, y).0[0] >= 128 {
                    mask.set(x as i64, y as i64);
                }
            }
        }
        mask
    }

    pub fn save_png(&self, path: &std::path::Path) -> Result<(), image::ImageError> {
        self.to_gray_image().save(path)
    }

    pub fn load_png(path: &std::path::Path) -> Result<Self, image::ImageError> {
        let img = image::open(path)?.into_luma8();
        Ok(Self::from_gray_image(&img))
    }

    /// Intersection-over-union against another mask of the same size.
    pub fn iou(&self, other: &Self) -> f64 {
        let mut inter = 0usize;
        let mut union = 0usize;
        for (a, b) in self.bits.iter().zip(other.bits.iter()) {
            if *a && *b {
                inter += 1;
            }
            if *a || *b {
                union += 1;
            }
        }
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }

    /// 8-neighborhood dilation by one pixel.
    pub fn dilated(&self) -> Self {
        let mut out = Self::empty(self.width, self.height);
        for y in 0..self.height as i64 {
            for x in 0..self.width as i64 {
                if self.get(x, y) {
                    for dy in -1..=1 {
                        for dx in -1..=1 {
                            out.set(x + dx, y + dy);
                        }
                    }
                }
            }
        }
        out
    }

    /// 8-neighborhood erosion by one pixel (border pixels erode).
    pub fn eroded(&self) -> Self {
        let mut out = Self::empty(self.width, self.height);
        for y in 0..self.height as i64 {
            for x in 0..self.width as i64 {
                let mut keep = self.get(x, y);
                if keep {
                    'scan: for dy in -1..=1 {
                        for dx in -1..=1 {
                            if !self.get(x + dx, y + dy) {
                                keep = false;
                                break 'scan;
                            }
                        }
                    }
                }
                if keep {
                    out.set(x, y);
                }
            }
        }
        out
    }
}

/// Pixel positions of visible primitives in front of the camera; positions
/// may fall outside the image.
pub fn projected_visible_points(model: &WireframeModel, pose: &Pose, cam: &Camera) -> Vec<[f64; 2]> {
    let frame = Frame::new(pose, cam);
    model
        .primitives
        .iter()
        .filter(|pr| visibility(pr, &frame))
        .filter_map(|pr| frame.project(pr.p))
        .collect()
}

/// Bounding box of the visible projected primitives, `None` when nothing
/// projects in front of the camera (or the projection is degenerate).
pub fn projected_bbox(
    model: &WireframeModel,
    pose: &Pose,
    cam: &Camera,
) -> Option<crate::color_model::HintBox> {
    let pts = projected_visible_points(model, pose, cam);
    let mut x0 = f64::INFINITY;
    let mut y0 = f64::INFINITY;
    let mut x1 = f64::NEG_INFINITY;
    let mut y1 = f64::NEG_INFINITY;
    for [x, y] in pts {
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    if x0 >= x1 || y0 >= y1 {
        return None;
    }
    Some(crate::color_model::HintBox {
        x: x0,
        y: y0,
        w: x1 - x0,
        h: y1 - y0,
    })
}

/// Alpha-shape hull of 2D points rasterized onto a `width`x`height` canvas.
///
/// Triangulates the points, keeps triangles whose circumradius is at most
/// the 95th percentile of the triangulation's edge lengths, and fills them.
/// Every input point's own pixel is stamped. Fewer than 3 points, or a
/// degenerate (collinear) set, fall back to a thickened polyline.
pub fn rasterize_hull(points: &[[f64; 2]], width: u32, height: u32) -> ProjectionMask {
    let mut mask = ProjectionMask::empty(width, height);
    if points.is_empty() {
        return mask;
    }
    for p in points {
        mask.set(p[0].floor() as i64, p[1].floor() as i64);
    }
    if points.len() < 3 {
        return mask;
    }

    let pts: Vec<Point> = points.iter().map(|p| Point { x: p[0], y: p[1] }).collect();
    let tri = triangulate(&pts);
    if tri.triangles.is_empty() {
        stamp_polyline(&mut mask, points);
        return mask;
    }

    let mut edge_lens = Vec::new();
    for t in 0..tri.triangles.len() / 3 {
        for k in 0..3 {
            let a = tri.triangles[3 * t + k];
            let b = tri.triangles[3 * t + (k + 1) % 3];
            if a < b {
                edge_lens.push(dist(points[a], points[b]));
            }
        }
    }
    edge_lens.sort_by(|a, b| a.total_cmp(b));
    let idx = ((edge_lens.len() as f64 * 0.95).ceil() as usize).clamp(1, edge_lens.len()) - 1;
    let alpha = edge_lens[idx];

    for t in 0..tri.triangles.len() / 3 {
        let a = points[tri.triangles[3 * t]];
        let b = points[tri.triangles[3 * t + 1]];
        let c = points[tri.triangles[3 * t + 2]];
        if circumradius(a, b, c) <= alpha {
            fill_triangle(&mut mask, a, b, c);
        }
    }
    mask
}

/// Projected hull mask clipped to the camera image.
pub fn projection_hull(model: &WireframeModel, pose: &Pose, cam: &Camera) -> ProjectionMask {
    rasterize_hull(
        &projected_visible_points(model, pose, cam),
        cam.width,
        cam.height,
    )
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn circumradius(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    let (la, lb, lc) = (dist(b, c), dist(a, c), dist(a, b));
    let cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    let area2 = cross.abs();
    if area2 < 1e-12 {
        return f64::INFINITY;
    }
    la * lb * lc / (2.0 * area2)
}

/// Sets every pixel whose center lies in the closed triangle.
fn fill_triangle(mask: &mut ProjectionMask, a: [f64; 2], b: [f64; 2], c: [f64; 2]) {
    let x0 = a[0].min(b[0]).min(c[0]).floor().max(0.0) as i64;
    let x1 = (a[0].max(b[0]).max(c[0]).ceil() as i64).min(mask.width as i64 - 1);
    let y0 = a[1].min(b[1]).min(c[1]).floor().max(0.0) as i64;
    let y1 = (a[1].max(b[1]).max(c[1]).ceil() as i64).min(mask.height as i64 - 1);
    let sign = |p: [f64; 2], q: [f64; 2], r: [f64; 2]| {
        (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
    };
    for y in y0..=y1 {
        for x in x0..=x1 {
            let r = [x as f64 + 0.5, y as f64 + 0.5];
            let d1 = sign(a, b, r);
            let d2 = sign(b, c, r);
            let d3 = sign(c, a, r);
            let eps = 1e-9;
            let has_neg = d1 < -eps || d2 < -eps || d3 < -eps;
            let has_pos = d1 > eps || d2 > eps || d3 > eps;
            if !(has_neg && has_pos) {
                mask.set(x, y);
            }
        }
    }
}

/// Degenerate fallback: connect the points in order along their dominant
/// direction and stamp a thick line.
fn stamp_polyline(mask: &mut ProjectionMask, points: &[[f64; 2]]) {
    let n = points.len() as f64;
    let mean = points.iter().fold([0.0, 0.0], |m, p| [m[0] + p[0] / n, m[1] + p[1] / n]);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in points {
        let (dx, dy) = (p[0] - mean[0], p[1] - mean[1]);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    // leading eigenvector of the 2x2 covariance
    let tr = sxx + syy;
    let det = sxx * syy - sxy * sxy;
    let lam = tr / 2.0 + (tr * tr / 4.0 - det).max(0.0).sqrt();
    let dir = if sxy.abs() > 1e-12 {
        let d = [lam - syy, sxy];
        let n = (d[0] * d[0] + d[1] * d[1]).sqrt();
        [d[0] / n, d[1] / n]
    } else if sxx >= syy {
        [1.0, 0.0]
    } else {
        [0.0, 1.0]
    };

    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| {
        let ti = points[i][0] * dir[0] + points[i][1] * dir[1];
        let tj = points[j][0] * dir[0] + points[j][1] * dir[1];
        ti.total_cmp(&tj)
    });
    for w in order.windows(2) {
        let (a, b) = (points[w[0]], points[w[1]]);
        let steps = (dist(a, b) * 2.0).ceil() as usize + 1;
        for s in 0..=steps {
            let t = s as f64 / steps as f64;
            let x = a[0] + t * (b[0] - a[0]);
            let y = a[1] + t * (b[1] - a[1]);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    mask.set(x.floor() as i64 + dx, y.floor() as i64 + dy);
                }
            }
        }
    }
}

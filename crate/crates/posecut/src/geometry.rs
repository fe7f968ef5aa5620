//! Pose parametrization, perspective camera, and projection of 3D points.
//!
//! The pose has six parameters: azimuth `a` (degrees), elevation `b` (meters),
//! camera tilt `c` (degrees), depth `d` (meters) and an image-plane
//! translation `(u, v)` in degrees of visual angle. The camera orbits the
//! object: it sits at optical-axis distance `d` from the model center, raised
//! by `b`, rotated about the model's vertical axis by `a`, rolled by `c`
//! about the optical axis, and the projection is shifted in the image by
//! `(u, v)` converted through the field of view.
//!
//! All projection math runs on intervals ([`CellFrame`]); a concrete pose is
//! the degenerate cell, so point projection and pose-cell enclosures share
//! one code path and agree exactly on zero-width cells.

use std::fmt;
use std::path::Path;

use thiserror::Error;

use crate::interval::{IVec3, Interval};

/// Perspective pinhole camera. The focal length is derived so the image
/// width subtends `fov_deg` degrees of visual angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub width: u32,
    pub height: u32,
    pub fov_deg: f64,
}

pub const DEFAULT_FOV_DEG: f64 = 55.0;

impl Camera {
    pub fn new(width: u32, height: u32) -> Self {
        Self::with_fov(width, height, DEFAULT_FOV_DEG)
    }

    pub fn with_fov(width: u32, height: u32, fov_deg: f64) -> Self {
        assert!(width > 0 && height > 0 && fov_deg > 0.0 && fov_deg < 180.0);
        Self {
            width,
            height,
            fov_deg,
        }
    }

    pub fn focal_px(&self) -> f64 {
        (self.width as f64 / 2.0) / (self.fov_deg.to_radians() / 2.0).tan()
    }

    /// Conversion factor for the image translation: pixels per degree of
    /// visual angle, with the full width covering the field of view.
    pub fn px_per_deg(&self) -> f64 {
        self.width as f64 / self.fov_deg
    }

    pub fn principal_point(&self) -> [f64; 2] {
        [self.width as f64 / 2.0, self.height as f64 / 2.0]
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= 0.0 && y >= 0.0 && x < self.width as f64 && y < self.height as f64
    }

    pub fn n_pixels(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

/// A 6-DOF object pose. Azimuth wraps into `[-180, 180)` on construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub azimuth: f64,
    pub elevation: f64,
    pub tilt: f64,
    pub depth: f64,
    pub img_u: f64,
    pub img_v: f64,
}

impl Pose {
    pub fn new(azimuth: f64, elevation: f64, tilt: f64, depth: f64, img_u: f64, img_v: f64) -> Self {
        assert!(depth > 0.0, "pose depth must be positive, got {depth}");
        Self {
            azimuth: wrap_azimuth(azimuth),
            elevation,
            tilt,
            depth,
            img_u,
            img_v,
        }
    }

    pub fn to_cell(&self) -> PoseCell {
        PoseCell {
            a: Interval::point(self.azimuth),
            b: Interval::point(self.elevation),
            c: Interval::point(self.tilt),
            d: Interval::point(self.depth),
            u: Interval::point(self.img_u),
            v: Interval::point(self.img_v),
        }
    }

    pub fn to_line(&self) -> String {
        format!(
            "{} {} {} {} {} {}",
            self.azimuth, self.elevation, self.tilt, self.depth, self.img_u, self.img_v
        )
    }

    pub fn from_line(line: &str) -> Result<Self, PoseFormatError> {
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| PoseFormatError::BadNumber(line.to_string()))?;
        if vals.len() != 6 {
            return Err(PoseFormatError::WrongFieldCount(vals.len()));
        }
        if vals[3] <= 0.0 {
            return Err(PoseFormatError::NonPositiveDepth(vals[3]));
        }
        Ok(Self::new(vals[0], vals[1], vals[2], vals[3], vals[4], vals[5]))
    }

    pub fn save(&self, path: &Path) -> Result<(), PoseFormatError> {
        std::fs::write(path, self.to_line() + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, PoseFormatError> {
        let text = std::fs::read_to_string(path)?;
        let line = text.lines().next().ok_or(PoseFormatError::Empty)?;
        Self::from_line(line)
    }
}

impl fmt::Display for Pose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "a={:.2} b={:.2} c={:.2} d={:.2} u={:.2} v={:.2}",
            self.azimuth, self.elevation, self.tilt, self.depth, self.img_u, self.img_v
        )
    }
}

/// Wraps an azimuth in degrees into `[-180, 180)`.
pub fn wrap_azimuth(a: f64) -> f64 {
    let w = a - 360.0 * ((a + 180.0) / 360.0).floor();
    // floor can land exactly on 180 for inputs like -180-eps
    if w >= 180.0 {
        w - 360.0
    } else {
        w
    }
}

/// Circular azimuth distance in degrees, in `[0, 180]`.
pub fn azimuth_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).abs() % 360.0;
    d.min(360.0 - d)
}

#[derive(Debug, Error)]
pub enum PoseFormatError {
    #[error("pose line has {0} fields, expected 6")]
    WrongFieldCount(usize),
    #[error("pose line contains a non-numeric field: {0:?}")]
    BadNumber(String),
    #[error("pose depth must be positive, got {0}")]
    NonPositiveDepth(f64),
    #[error("pose file is empty")]
    Empty,
    #[error("pose cell file needs two lines")]
    MissingCellLine,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Axis identifiers for [`PoseCell`], in storage order.
pub const POSE_AXES: [&str; 6] = ["azimuth", "elevation", "tilt", "depth", "img_u", "img_v"];

/// An axis-aligned box in the 6-D pose space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseCell {
    pub a: Interval,
    pub b: Interval,
    pub c: Interval,
    pub d: Interval,
    pub u: Interval,
    pub v: Interval,
}

impl PoseCell {
    #[allow(clippy::too_many_arguments)]
    pub fn from_ranges(
        a: (f64, f64),
        b: (f64, f64),
        c: (f64, f64),
        d: (f64, f64),
        u: (f64, f64),
        v: (f64, f64),
    ) -> Self {
        assert!(d.0 > 0.0, "depth range must be positive");
        Self {
            a: Interval::new(a.0, a.1),
            b: Interval::new(b.0, b.1),
            c: Interval::new(c.0, c.1),
            d: Interval::new(d.0, d.1),
            u: Interval::new(u.0, u.1),
            v: Interval::new(v.0, v.1),
        }
    }

    pub fn axis(&self, i: usize) -> Interval {
        match i {
            0 => self.a,
            1 => self.b,
            2 => self.c,
            3 => self.d,
            4 => self.u,
            5 => self.v,
            _ => panic!("pose axis index {i} out of range"),
        }
    }

    pub fn with_axis(mut self, i: usize, iv: Interval) -> Self {
        match i {
            0 => self.a = iv,
            1 => self.b = iv,
            2 => self.c = iv,
            3 => self.d = iv,
            4 => self.u = iv,
            5 => self.v = iv,
            _ => panic!("pose axis index {i} out of range"),
        }
        self
    }

    pub fn widths(&self) -> [f64; 6] {
        [
            self.a.width(),
            self.b.width(),
            self.c.width(),
            self.d.width(),
            self.u.width(),
            self.v.width(),
        ]
    }

    pub fn center(&self) -> Pose {
        Pose::new(
            self.a.mid(),
            self.b.mid(),
            self.c.mid(),
            self.d.mid(),
            self.u.mid(),
            self.v.mid(),
        )
    }

    pub fn contains(&self, p: &Pose) -> bool {
        self.a.contains(p.azimuth)
            && self.b.contains(p.elevation)
            && self.c.contains(p.tilt)
            && self.d.contains(p.depth)
            && self.u.contains(p.img_u)
            && self.v.contains(p.img_v)
    }

    pub fn contains_cell(&self, o: &PoseCell) -> bool {
        (0..6).all(|i| self.axis(i).contains_interval(o.axis(i)))
    }

    pub fn is_point(&self) -> bool {
        self.widths().iter().all(|w| *w == 0.0)
    }

    /// Splits along `axis` at the midpoint. The two children cover the
    /// parent and overlap only on the split plane.
    pub fn split(&self, axis: usize) -> (PoseCell, PoseCell) {
        let iv = self.axis(axis);
        let m = iv.mid();
        (
            self.with_axis(axis, Interval::new(iv.lo, m)),
            self.with_axis(axis, Interval::new(m, iv.hi)),
        )
    }

    /// Smallest box covering both cells.
    pub fn merge(&self, o: &PoseCell) -> PoseCell {
        let mut out = *self;
        for i in 0..6 {
            out = out.with_axis(i, self.axis(i).union(o.axis(i)));
        }
        out
    }

    pub fn volume(&self) -> f64 {
        self.widths().iter().product()
    }

    /// All 2^6 corner poses.
    pub fn corners(&self) -> Vec<Pose> {
        let mut out = Vec::with_capacity(64);
        for bits in 0..64u32 {
            let pick = |i: usize| {
                let iv = self.axis(i);
                if bits & (1 << i) == 0 {
                    iv.lo
                } else {
                    iv.hi
                }
            };
            out.push(Pose::new(pick(0), pick(1), pick(2), pick(3), pick(4), pick(5)));
        }
        out.dedup_by(|x, y| x == y);
        out
    }

    /// Parameters `(a, b, c, d)` that maximize the projected size of the
    /// object over this cell: azimuth nearest a side view, highest
    /// elevation, lowest tilt, smallest depth.
    pub fn largest_projection_params(&self) -> (f64, f64, f64, f64) {
        (
            nearest_in_interval(self.a, &[0.0, -180.0, 180.0]),
            self.b.hi,
            self.c.lo,
            self.d.lo,
        )
    }

    /// Parameters `(a, b, c, d)` that minimize the projected size: azimuth
    /// nearest a front/back view, lowest elevation, lowest tilt, largest
    /// depth.
    pub fn smallest_projection_params(&self) -> (f64, f64, f64, f64) {
        (
            nearest_in_interval(self.a, &[-90.0, 90.0]),
            self.b.lo,
            self.c.lo,
            self.d.hi,
        )
    }

    pub fn to_lines(&self) -> String {
        format!(
            "{} {} {} {} {} {}\n{} {} {} {} {} {}\n",
            self.a.lo, self.b.lo, self.c.lo, self.d.lo, self.u.lo, self.v.lo,
            self.a.hi, self.b.hi, self.c.hi, self.d.hi, self.u.hi, self.v.hi,
        )
    }

    pub fn from_lines(text: &str) -> Result<Self, PoseFormatError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let lo = parse_six(lines.next().ok_or(PoseFormatError::Empty)?)?;
        let hi = parse_six(lines.next().ok_or(PoseFormatError::MissingCellLine)?)?;
        Ok(Self::from_ranges(
            (lo[0], hi[0]),
            (lo[1], hi[1]),
            (lo[2], hi[2]),
            (lo[3], hi[3]),
            (lo[4], hi[4]),
            (lo[5], hi[5]),
        ))
    }

    pub fn save(&self, path: &Path) -> Result<(), PoseFormatError> {
        std::fs::write(path, self.to_lines())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, PoseFormatError> {
        Self::from_lines(&std::fs::read_to_string(path)?)
    }
}

fn parse_six(line: &str) -> Result<[f64; 6], PoseFormatError> {
    let vals: Vec<f64> = line
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| PoseFormatError::BadNumber(line.to_string()))?;
    if vals.len() != 6 {
        return Err(PoseFormatError::WrongFieldCount(vals.len()));
    }
    Ok([vals[0], vals[1], vals[2], vals[3], vals[4], vals[5]])
}

/// Picks the value of `iv` nearest to any of `targets`: a contained target
/// wins (in listed order), otherwise the closest endpoint, ties broken
/// toward the upper endpoint.
fn nearest_in_interval(iv: Interval, targets: &[f64]) -> f64 {
    for &t in targets {
        if iv.contains(t) {
            return t;
        }
    }
    let dist = |x: f64| {
        targets
            .iter()
            .map(|t| (x - t).abs())
            .fold(f64::INFINITY, f64::min)
    };
    if dist(iv.lo) < dist(iv.hi) {
        iv.lo
    } else {
        iv.hi
    }
}

/// Interval camera frame for a pose cell: encloses the world-to-camera
/// rotation rows, the camera center, and the pixel offsets for every pose in
/// the cell. A degenerate cell reproduces scalar projection exactly.
#[derive(Debug, Clone)]
pub struct CellFrame {
    /// Rows of the world-to-camera rotation (x right, y down, z forward).
    row_x: IVec3,
    row_y: IVec3,
    row_z: IVec3,
    center: IVec3,
    focal: f64,
    off_x: Interval,
    off_y: Interval,
    img_w: f64,
    img_h: f64,
}

/// Enclosure of a projected point over a pose cell.
#[derive(Debug, Clone, Copy)]
pub struct ProjectedBox {
    /// Pixel x range, only meaningful where `z` admits positive depth.
    pub x: Interval,
    /// Pixel y range.
    pub y: Interval,
    /// Camera-frame depth range.
    pub z: Interval,
}

impl ProjectedBox {
    /// The point sits in front of the camera for every pose in the cell.
    pub fn always_in_front(&self) -> bool {
        self.z.lo > MIN_DEPTH
    }

    /// The point sits behind the camera for every pose in the cell.
    pub fn never_in_front(&self) -> bool {
        self.z.hi <= MIN_DEPTH
    }
}

const MIN_DEPTH: f64 = 1e-9;

impl CellFrame {
    pub fn new(cell: &PoseCell, cam: &Camera) -> Self {
        let a = cell.a.scale(std::f64::consts::PI / 180.0);
        let c = cell.c.scale(std::f64::consts::PI / 180.0);
        let b = cell.b;
        let d = cell.d;

        // horizontal distance from the model center: camera raised by b,
        // optical-axis distance d (look-at), so h^2 = d^2 - b^2
        let h = d.square().sub(b.square()).sqrt_nonneg();

        let sin_a = a.sin();
        let cos_a = a.cos();
        let center = IVec3 {
            x: h.mul(sin_a),
            y: h.mul(cos_a).neg(),
            z: b,
        };

        // forward = -center / d (unit by construction)
        let fwd = IVec3 {
            x: center.x.div(d).neg(),
            y: center.y.div(d).neg(),
            z: center.z.div(d).neg(),
        };

        // right before roll: normalize(fwd x world_up) = (fy, -fx, 0)/|.|
        let norm_h = fwd.x.square().add(fwd.y.square()).sqrt_nonneg();
        let right0 = IVec3 {
            x: fwd.y.div(norm_h),
            y: fwd.x.div(norm_h).neg(),
            z: Interval::point(0.0),
        };
        // up before roll: right0 x fwd
        let up0 = IVec3 {
            x: right0.y.mul(fwd.z).sub(right0.z.mul(fwd.y)),
            y: right0.z.mul(fwd.x).sub(right0.x.mul(fwd.z)),
            z: right0.x.mul(fwd.y).sub(right0.y.mul(fwd.x)),
        };

        // roll by c about the optical axis
        let sin_c = c.sin();
        let cos_c = c.cos();
        let right = right0.scale_iv(cos_c).add(up0.scale_iv(sin_c));
        let up = up0.scale_iv(cos_c).sub(right0.scale_iv(sin_c));

        let ppd = cam.px_per_deg();
        let [cx, cy] = cam.principal_point();
        Self {
            row_x: right,
            row_y: IVec3 {
                x: up.x.neg(),
                y: up.y.neg(),
                z: up.z.neg(),
            },
            row_z: fwd,
            center,
            focal: cam.focal_px(),
            off_x: cell.u.scale(ppd).add_scalar(cx),
            off_y: cell.v.scale(ppd).add_scalar(cy),
            img_w: cam.width as f64,
            img_h: cam.height as f64,
        }
    }

    /// Encloses the pixel projection of a world point over the cell.
    pub fn project(&self, p: [f64; 3]) -> ProjectedBox {
        let rel = IVec3::point(p).sub(self.center);
        let x = self.row_x.dot(rel);
        let y = self.row_y.dot(rel);
        let z = self.row_z.dot(rel);
        let zpos = Interval::new(z.lo.max(MIN_DEPTH), z.hi.max(MIN_DEPTH));
        let px = x.div(zpos).scale(self.focal).add(self.off_x);
        let py = y.div(zpos).scale(self.focal).add(self.off_y);
        ProjectedBox { x: px, y: py, z }
    }

    /// Camera-frame coordinates of a world point (no perspective divide).
    pub fn to_camera(&self, p: [f64; 3]) -> IVec3 {
        let rel = IVec3::point(p).sub(self.center);
        IVec3 {
            x: self.row_x.dot(rel),
            y: self.row_y.dot(rel),
            z: self.row_z.dot(rel),
        }
    }

    /// Rotates a world direction into the camera frame.
    pub fn rotate_dir(&self, e: [f64; 3]) -> IVec3 {
        let ev = IVec3::point(e);
        IVec3 {
            x: self.row_x.dot(ev),
            y: self.row_y.dot(ev),
            z: self.row_z.dot(ev),
        }
    }

    /// Enclosure of `n . (p - C)`: negative values mean the surface normal
    /// faces the camera.
    pub fn view_dot(&self, p: [f64; 3], n: [f64; 3]) -> Interval {
        IVec3::point(n).dot(IVec3::point(p).sub(self.center))
    }

    /// In-image direction of an edge through `p` with 3D direction `e`,
    /// up to positive scale: `(ex*z - x*ez, ey*z - y*ez)`.
    pub fn edge_direction_2d(&self, p: [f64; 3], e: [f64; 3]) -> (Interval, Interval) {
        let pc = self.to_camera(p);
        let ec = self.rotate_dir(e);
        let dx = ec.x.mul(pc.z).sub(pc.x.mul(ec.z));
        let dy = ec.y.mul(pc.z).sub(pc.y.mul(ec.z));
        (dx, dy)
    }

    pub fn image_size(&self) -> (f64, f64) {
        (self.img_w, self.img_h)
    }
}

/// Scalar view of a [`CellFrame`] built from a single pose. Projection
/// results are exact values rather than enclosures.
#[derive(Debug, Clone)]
pub struct Frame(CellFrame);

impl Frame {
    pub fn new(pose: &Pose, cam: &Camera) -> Self {
        Frame(CellFrame::new(&pose.to_cell(), cam))
    }

    /// Projects a world point; `None` when it lies behind the camera.
    /// Out-of-image pixels are returned as-is — callers clip.
    pub fn project(&self, p: [f64; 3]) -> Option<[f64; 2]> {
        let b = self.0.project(p);
        if b.z.lo <= MIN_DEPTH {
            None
        } else {
            Some([b.x.lo, b.y.lo])
        }
    }

    /// True when at least one of the surface normals faces the camera.
    pub fn normal_visible(&self, p: [f64; 3], n: [f64; 3]) -> bool {
        self.0.view_dot(p, n).lo < 0.0
    }

    /// In-image orientation of a projected edge, unsigned degrees in
    /// `[0, 180)`. `None` when the direction degenerates (edge along the
    /// viewing ray) or the point is behind the camera.
    pub fn edge_orientation_deg(&self, p: [f64; 3], e: [f64; 3]) -> Option<f64> {
        let pc = self.0.to_camera(p);
        if pc.z.lo <= MIN_DEPTH {
            return None;
        }
        let (dx, dy) = self.0.edge_direction_2d(p, e);
        let (dx, dy) = (dx.lo, dy.lo);
        if dx.abs() < 1e-15 && dy.abs() < 1e-15 {
            return None;
        }
        let mut theta = dy.atan2(dx).to_degrees();
        if theta < 0.0 {
            theta += 180.0;
        }
        if theta >= 180.0 {
            theta -= 180.0;
        }
        Some(theta)
    }

    pub fn cell_frame(&self) -> &CellFrame {
        &self.0
    }
}

/// Convenience wrapper: projects one point under one pose.
pub fn project_point(p: [f64; 3], pose: &Pose, cam: &Camera) -> Option<[f64; 2]> {
    Frame::new(pose, cam).project(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cam() -> Camera {
        Camera::new(160, 120)
    }

    #[test]
    fn object_center_hits_principal_point() {
        let pose = Pose::new(33.0, 1.2, 0.0, 8.0, 0.0, 0.0);
        let px = project_point([0.0, 0.0, 0.0], &pose, &cam()).unwrap();
        let [cx, cy] = cam().principal_point();
        assert!((px[0] - cx).abs() < 1e-9 && (px[1] - cy).abs() < 1e-9);
    }

    #[test]
    fn azimuth_wraps_to_identical_projection() {
        let p = [1.0, 0.4, -0.2];
        let t1 = Pose::new(25.0, 1.0, 3.0, 7.0, 2.0, -1.0);
        let t2 = Pose::new(25.0 + 360.0, 1.0, 3.0, 7.0, 2.0, -1.0);
        assert_eq!(t1.azimuth, t2.azimuth);
        assert_eq!(
            project_point(p, &t1, &cam()).unwrap(),
            project_point(p, &t2, &cam()).unwrap()
        );
    }

    /// Independent oracle: homogeneous projection K [R | t] built with
    /// nalgebra rotation composition instead of the interval frame.
    fn oracle_project(p: [f64; 3], pose: &Pose, cam: &Camera) -> Option<[f64; 2]> {
        use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
        let a = pose.azimuth.to_radians();
        let c = pose.tilt.to_radians();
        let (b, d) = (pose.elevation, pose.depth);
        let h = (d * d - b * b).max(0.0).sqrt();
        let center = Vector3::new(h * a.sin(), -h * a.cos(), b);
        let fwd = Unit::new_normalize(-center);
        let up0 = Vector3::z();
        let right = Unit::new_normalize(fwd.cross(&up0));
        let up = right.cross(&fwd);
        // world -> camera before roll: rows x=right, y=-up, z=fwd
        let r_wc = Matrix3::from_rows(&[
            right.transpose(),
            (-up).transpose(),
            fwd.transpose(),
        ]);
        // roll about the optical axis, in the y-down camera frame
        let roll = Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::z()), c);
        let r_total = roll.matrix() * r_wc;
        let pc = r_total * (Vector3::new(p[0], p[1], p[2]) - center);
        if pc.z <= 1e-9 {
            return None;
        }
        let f = cam.focal_px();
        let ppd = cam.px_per_deg();
        let [cx, cy] = cam.principal_point();
        Some([
            f * pc.x / pc.z + cx + pose.img_u * ppd,
            f * pc.y / pc.z + cy + pose.img_v * ppd,
        ])
    }

    #[test]
    fn matches_homogeneous_matrix_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cam = cam();
        for _ in 0..500 {
            let pose = Pose::new(
                rng.gen_range(-180.0..180.0),
                rng.gen_range(0.0..3.0),
                rng.gen_range(-20.0..20.0),
                rng.gen_range(4.0..50.0),
                rng.gen_range(-10.0..10.0),
                rng.gen_range(-10.0..10.0),
            );
            let p = [
                rng.gen_range(-2.5..2.5),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-0.8..0.8),
            ];
            let ours = project_point(p, &pose, &cam);
            let them = oracle_project(p, &pose, &cam);
            match (ours, them) {
                (Some(q), Some(r)) => {
                    assert!(
                        (q[0] - r[0]).abs() < 1e-6 && (q[1] - r[1]).abs() < 1e-6,
                        "mismatch at {pose}: {q:?} vs {r:?}"
                    );
                }
                (a, b) => assert_eq!(a.is_some(), b.is_some()),
            }
        }
    }

    #[test]
    fn doubling_depth_halves_offset() {
        // b = 0 and the point in the plane through the origin orthogonal to
        // the optical axis, so the offset scales exactly with 1/d
        let cam = cam();
        let p = [1.3, 0.0, 0.6]; // camera at azimuth 0 looks along +y
        let t1 = Pose::new(0.0, 0.0, 0.0, 6.0, 0.0, 0.0);
        let t2 = Pose::new(0.0, 0.0, 0.0, 12.0, 0.0, 0.0);
        let [cx, cy] = cam.principal_point();
        let q1 = project_point(p, &t1, &cam).unwrap();
        let q2 = project_point(p, &t2, &cam).unwrap();
        for (o1, o2) in [(q1[0] - cx, q2[0] - cx), (q1[1] - cy, q2[1] - cy)] {
            assert!((o2 / o1 - 0.5).abs() < 1e-6, "ratio {}", o2 / o1);
            // and the oracle agrees on both
        }
        let r1 = oracle_project(p, &t1, &cam).unwrap();
        let r2 = oracle_project(p, &t2, &cam).unwrap();
        assert!(((r2[0] - cx) / (r1[0] - cx) - 0.5).abs() < 1e-6);
    }

    #[test]
    fn image_translation_is_linear_in_pixels() {
        let cam = cam();
        let p = [0.9, -0.3, 0.2];
        let base = Pose::new(40.0, 1.0, 0.0, 9.0, 0.0, 0.0);
        let q0 = project_point(p, &base, &cam).unwrap();
        for delta in [1.0, 3.44, -5.0, 13.75] {
            let t = Pose::new(40.0, 1.0, 0.0, 9.0, delta, 0.0);
            let q = project_point(p, &t, &cam).unwrap();
            let expect = delta / cam.fov_deg * cam.width as f64;
            assert!((q[0] - q0[0] - expect).abs() < 0.5);
            assert!((q[1] - q0[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn largest_params_follow_azimuth_rule() {
        let cell = PoseCell::from_ranges(
            (-30.0, 40.0),
            (0.0, 3.0),
            (0.0, 0.0),
            (4.0, 50.0),
            (-5.0, 5.0),
            (-5.0, 5.0),
        );
        let (a, b, c, d) = cell.largest_projection_params();
        assert_eq!(a, 0.0);
        assert_eq!(b, 3.0);
        assert_eq!(c, 0.0);
        assert_eq!(d, 4.0);

        let cell2 = PoseCell::from_ranges(
            (30.0, 60.0),
            (0.0, 3.0),
            (0.0, 0.0),
            (4.0, 50.0),
            (0.0, 0.0),
            (0.0, 0.0),
        );
        assert_eq!(cell2.largest_projection_params().0, 30.0);
    }

    #[test]
    fn smallest_params_follow_azimuth_rule() {
        let cell = PoseCell::from_ranges(
            (80.0, 120.0),
            (0.0, 3.0),
            (0.0, 0.0),
            (4.0, 50.0),
            (0.0, 0.0),
            (0.0, 0.0),
        );
        let (a, b, _, d) = cell.smallest_projection_params();
        assert_eq!(a, 90.0);
        assert_eq!(b, 0.0);
        assert_eq!(d, 50.0);

        // tie between -10 and 10 against {-90, 90}: upper endpoint wins
        let tied = PoseCell::from_ranges(
            (-10.0, 10.0),
            (0.0, 0.0),
            (0.0, 0.0),
            (4.0, 4.0),
            (0.0, 0.0),
            (0.0, 0.0),
        );
        assert_eq!(tied.smallest_projection_params().0, 10.0);
    }

    #[test]
    fn cell_roundtrips_through_text() {
        let cell = PoseCell::from_ranges(
            (-180.0, 180.0),
            (0.0, 3.0),
            (0.0, 0.0),
            (4.0, 50.0),
            (-27.5, 27.5),
            (-27.5, 27.5),
        );
        let text = cell.to_lines();
        assert_eq!(PoseCell::from_lines(&text).unwrap(), cell);
        let pose = Pose::new(12.5, 0.5, 0.0, 10.0, 1.0, -2.0);
        assert_eq!(Pose::from_line(&pose.to_line()).unwrap(), pose);
    }

    #[test]
    fn cell_enclosure_contains_sampled_projections() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cam = cam();
        for _ in 0..200 {
            let a0 = rng.gen_range(-180.0..160.0);
            let d0 = rng.gen_range(4.0..40.0);
            let cell = PoseCell::from_ranges(
                (a0, a0 + rng.gen_range(0.0..180.0)),
                (0.0, rng.gen_range(0.0..3.0)),
                (0.0, 0.0),
                (d0, d0 + rng.gen_range(0.0..10.0)),
                (-5.0, 5.0),
                (0.0, 0.0),
            );
            let frame = CellFrame::new(&cell, &cam);
            let p = [
                rng.gen_range(-2.5..2.5),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-0.8..0.8),
            ];
            let boxed = frame.project(p);
            for _ in 0..20 {
                let pose = Pose::new(
                    rng.gen_range(cell.a.lo..=cell.a.hi),
                    rng.gen_range(cell.b.lo..=cell.b.hi),
                    0.0,
                    rng.gen_range(cell.d.lo..=cell.d.hi),
                    rng.gen_range(cell.u.lo..=cell.u.hi),
                    0.0,
                );
                if let Some(q) = project_point(p, &pose, &cam) {
                    assert!(
                        boxed.x.contains(q[0]) && boxed.y.contains(q[1]),
                        "enclosure {boxed:?} misses {q:?}"
                    );
                }
            }
        }
    }

    proptest! {
        #[test]
        fn split_merge_preserves_cell(axis in 0usize..6,
                                      lo in -50.0f64..50.0, w in 0.001f64..40.0) {
            let base = PoseCell::from_ranges(
                (lo, lo + w), (0.0, 3.0), (0.0, 1.0), (4.0, 50.0), (-27.5, 27.5), (-27.5, 27.5));
            let (l, r) = base.split(axis);
            let merged = l.merge(&r);
            prop_assert_eq!(merged, base);
            prop_assert_eq!(merged.volume(), base.volume());
            prop_assert!(base.contains_cell(&l) && base.contains_cell(&r));
        }

        #[test]
        fn wrap_is_idempotent_and_in_range(a in -1000.0f64..1000.0) {
            let w = wrap_azimuth(a);
            prop_assert!((-180.0..180.0).contains(&w));
            prop_assert_eq!(wrap_azimuth(w), w);
        }
    }
}

//! Synthetic scene generation and brute-force oracles.
//!
//! Scenes are rendered deterministically from a seed: a textured background
//! (value noise plus a color gradient, optionally with decoy strokes), the
//! model's projection hull filled with a foreground color, and short edge
//! strokes at every visible projected primitive. The ground-truth mask is the
//! projection hull raster, exactly.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bnb;
use crate::bounds::ScoreContext;
use crate::color::{luv_distance, rgb_to_luv};
use crate::energy::{CutProblem, Segmentation};
use crate::geometry::{Camera, Frame, Pose, PoseCell};
use crate::hull::{projection_hull, ProjectionMask};
use crate::wireframe::{visibility, WireframeModel};

pub const SCENE_WIDTH: u32 = 160;
pub const SCENE_HEIGHT: u32 = 120;

/// Limit above which `brute_force_pose` refuses to enumerate.
pub const MAX_GRID_POSES: u64 = 1_000_000;

/// Limit above which `brute_force_seg` refuses to enumerate.
pub const MAX_SEG_NODES: usize = 20;

#[derive(Debug)]
pub enum SynthError {
    /// The requested pose projects no primitive onto the image.
    OffImage,
    /// No random pose with a reasonably sized projection was found.
    NoValidPose,
    /// The pose grid would contain more than `MAX_GRID_POSES` leaves.
    GridTooLarge(u64),
    /// The cut problem has more than `MAX_SEG_NODES` nodes.
    TooManyNodes(usize),
    Io(std::io::Error),
    Image(image::ImageError),
    Pose(crate::geometry::PoseFormatError),
}

impl fmt::Display for SynthError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SynthError::OffImage => write!(f, "pose projects fully off-image"),
            SynthError::NoValidPose => write!(f, "could not sample an on-image pose"),
            SynthError::GridTooLarge(n) => {
                write!(f, "pose grid has {n} leaves, limit {MAX_GRID_POSES}")
            }
            SynthError::TooManyNodes(n) => {
                write!(f, "cut problem has {n} nodes, limit {MAX_SEG_NODES}")
            }
            SynthError::Io(e) => write!(f, "io error: {e}"),
            SynthError::Image(e) => write!(f, "image error: {e}"),
            SynthError::Pose(e) => write!(f, "pose file error: {e}"),
        }
    }
}

impl std::error::Error for SynthError {}

impl From<std::io::Error> for SynthError {
    fn from(e: std::io::Error) -> Self {
        SynthError::Io(e)
    }
}

impl From<image::ImageError> for SynthError {
    fn from(e: image::ImageError) -> Self {
        SynthError::Image(e)
    }
}

impl From<crate::geometry::PoseFormatError> for SynthError {
    fn from(e: crate::geometry::PoseFormatError) -> Self {
        SynthError::Pose(e)
    }
}

/// Rendering noise. All zeros produce a flat background with crisp strokes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    /// Amplitude of the value-noise background texture, in 8-bit levels.
    pub background_amp: f64,
    /// Per-pixel color jitter on both background and foreground.
    pub pixel_jitter: f64,
    /// Number of random distractor strokes drawn behind the object.
    pub decoy_strokes: usize,
}

impl NoiseParams {
    pub fn noiseless() -> Self {
        Self {
            background_amp: 0.0,
            pixel_jitter: 0.0,
            decoy_strokes: 0,
        }
    }

    pub fn noisy() -> Self {
        Self {
            background_amp: 34.0,
            pixel_jitter: 7.0,
            decoy_strokes: 10,
        }
    }
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self::noisy()
    }
}

/// A rendered scene with its ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub image: RgbImage,
    pub mask: ProjectionMask,
    pub pose: Pose,
    pub noise: NoiseParams,
    pub seed: u64,
}

/// Bilinearly interpolated random lattice, one octave.
struct ValueNoise {
    cols: usize,
    step: f64,
    values: Vec<f64>,
}

impl ValueNoise {
    fn new(rng: &mut ChaCha8Rng, width: u32, height: u32, step: f64) -> Self {
        let cols = (width as f64 / step).ceil() as usize + 2;
        let rows = (height as f64 / step).ceil() as usize + 2;
        let values = (0..cols * rows).map(|_| rng.gen::<f64>()).collect();
        Self { cols, step, values }
    }

    fn at(&self, x: f64, y: f64) -> f64 {
        let gx = x / self.step;
        let gy = y / self.step;
        let ix = gx.floor() as usize;
        let iy = gy.floor() as usize;
        let fx = gx - ix as f64;
        let fy = gy - iy as f64;
        let v = |cx: usize, cy: usize| self.values[cy * self.cols + cx];
        let top = v(ix, iy) * (1.0 - fx) + v(ix + 1, iy) * fx;
        let bot = v(ix, iy + 1) * (1.0 - fx) + v(ix + 1, iy + 1) * fx;
        top * (1.0 - fy) + bot * fy
    }
}

fn clamp_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

fn jitter_color(base: [f64; 3], rng: &mut ChaCha8Rng, amp: f64) -> Rgb<u8> {
    let mut px = [0u8; 3];
    for c in 0..3 {
        let j = if amp > 0.0 {
            rng.gen_range(-amp..=amp)
        } else {
            0.0
        };
        px[c] = clamp_u8(base[c] + j);
    }
    Rgb(px)
}

/// Draws a straight stroke; pixels outside `clip` (when given) are skipped.
fn draw_stroke(
    img: &mut RgbImage,
    from: [f64; 2],
    to: [f64; 2],
    color: [f64; 3],
    rng: &mut ChaCha8Rng,
    jitter: f64,
    clip: Option<&ProjectionMask>,
) {
    let dx = to[0] - from[0];
    let dy = to[1] - from[1];
    let steps = (dx.abs().max(dy.abs()).ceil() as usize).max(1) * 2;
    for s in 0..=steps {
        let t = s as f64 / steps as f64;
        let x = (from[0] + t * dx).round() as i64;
        let y = (from[1] + t * dy).round() as i64;
        if x < 0 || y < 0 || x >= img.width() as i64 || y >= img.height() as i64 {
            continue;
        }
        if let Some(mask) = clip {
            if !mask.get(x, y) {
                continue;
            }
        }
        let px = jitter_color(color, rng, jitter);
        img.put_pixel(x as u32, y as u32, px);
    }
}

fn random_color(rng: &mut ChaCha8Rng) -> [f64; 3] {
    [
        rng.gen_range(0.0..256.0),
        rng.gen_range(0.0..256.0),
        rng.gen_range(0.0..256.0),
    ]
}

/// Acceptable projected-area band for randomly sampled poses.
const MIN_FG_AREA: usize = 1000;
const MAX_FG_AREA: usize = 7000;

fn sample_pose(
    rng: &mut ChaCha8Rng,
    model: &WireframeModel,
    cam: &Camera,
) -> Result<(Pose, ProjectionMask), SynthError> {
    for _ in 0..200 {
        let pose = Pose {
            azimuth: rng.gen_range(-180.0..180.0),
            elevation: rng.gen_range(0.6..2.2),
            tilt: 0.0,
            depth: rng.gen_range(6.5..13.0),
            img_u: rng.gen_range(-8.0..8.0),
            img_v: rng.gen_range(-6.0..6.0),
        };
        let mask = projection_hull(model, &pose, cam);
        let area = mask.area();
        if area >= MIN_FG_AREA && area <= MAX_FG_AREA {
            return Ok((pose, mask));
        }
    }
    Err(SynthError::NoValidPose)
}

/// Renders one scene. `pose: None` samples a pose whose projection lands on
/// the image with a reasonable area; an explicit pose whose projection misses
/// the image entirely is an error.
pub fn generate(
    model: &WireframeModel,
    pose: Option<Pose>,
    noise: &NoiseParams,
    seed: u64,
) -> Result<SyntheticScene, SynthError> {
    let cam = Camera::new(SCENE_WIDTH, SCENE_HEIGHT);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Background palette and texture are drawn before the pose so that the
    // same seed renders the same backdrop for a given or a sampled pose.
    let bg_base = [
        rng.gen_range(40.0..200.0),
        rng.gen_range(40.0..200.0),
        rng.gen_range(40.0..200.0),
    ];
    let grad_delta = [
        rng.gen_range(-60.0..60.0),
        rng.gen_range(-60.0..60.0),
        rng.gen_range(-60.0..60.0),
    ];
    let grad_dir = {
        let a = rng.gen_range(0.0..std::f64::consts::TAU);
        [a.cos(), a.sin()]
    };
    let coarse = ValueNoise::new(&mut rng, SCENE_WIDTH, SCENE_HEIGHT, 17.0);
    let fine = ValueNoise::new(&mut rng, SCENE_WIDTH, SCENE_HEIGHT, 5.0);

    let (pose, mask) = match pose {
        Some(p) => {
            let mask = projection_hull(model, &p, &cam);
            if mask.area() == 0 {
                return Err(SynthError::OffImage);
            }
            (p, mask)
        }
        None => sample_pose(&mut rng, model, &cam)?,
    };

    // Foreground color well separated from the background base.
    let as_luv = |c: [f64; 3]| rgb_to_luv([clamp_u8(c[0]), clamp_u8(c[1]), clamp_u8(c[2])]);
    let mut fg_base = random_color(&mut rng);
    for _ in 0..40 {
        if luv_distance(as_luv(fg_base), as_luv(bg_base)) > 55.0 {
            break;
        }
        fg_base = random_color(&mut rng);
    }
    let stroke_color = [fg_base[0] * 0.3, fg_base[1] * 0.3, fg_base[2] * 0.3];

    let mut img = RgbImage::new(SCENE_WIDTH, SCENE_HEIGHT);
    let w = SCENE_WIDTH as f64;
    let h = SCENE_HEIGHT as f64;
    for y in 0..SCENE_HEIGHT {
        for x in 0..SCENE_WIDTH {
            let fx = x as f64;
            let fy = y as f64;
            let g = grad_dir[0] * fx / w + grad_dir[1] * fy / h;
            let tex = if noise.background_amp > 0.0 {
                let n = 0.7 * coarse.at(fx, fy) + 0.3 * fine.at(fx, fy) - 0.5;
                n * noise.background_amp
            } else {
                0.0
            };
            let base = [
                bg_base[0] + grad_delta[0] * g + tex,
                bg_base[1] + grad_delta[1] * g + tex,
                bg_base[2] + grad_delta[2] * g + tex,
            ];
            img.put_pixel(x, y, jitter_color(base, &mut rng, noise.pixel_jitter));
        }
    }

    // Distractor strokes behind the object; half reuse the foreground color
    // so bottom-up color cues stay imperfect.
    for k in 0..noise.decoy_strokes {
        let from = [rng.gen_range(0.0..w), rng.gen_range(0.0..h)];
        let ang = rng.gen_range(0.0..std::f64::consts::TAU);
        let len = rng.gen_range(8.0..30.0);
        let to = [from[0] + ang.cos() * len, from[1] + ang.sin() * len];
        let color = if k % 2 == 0 {
            fg_base
        } else {
            random_color(&mut rng)
        };
        draw_stroke(&mut img, from, to, color, &mut rng, noise.pixel_jitter, None);
    }

    // Fill the hull, then stroke visible primitives along their projected
    // edge directions, clipped to the hull so the mask stays exact.
    for y in 0..SCENE_HEIGHT {
        for x in 0..SCENE_WIDTH {
            if mask.get(x as i64, y as i64) {
                img.put_pixel(x, y, jitter_color(fg_base, &mut rng, noise.pixel_jitter));
            }
        }
    }
    let frame = Frame::new(&pose, &cam);
    for prim in &model.primitives {
        if !visibility(prim, &frame) {
            continue;
        }
        let Some(center) = frame.project(prim.p) else {
            continue;
        };
        let Some(theta) = frame.edge_orientation_deg(prim.p, prim.e) else {
            continue;
        };
        let rad = theta.to_radians();
        let half = 2.5;
        let from = [center[0] - rad.cos() * half, center[1] - rad.sin() * half];
        let to = [center[0] + rad.cos() * half, center[1] + rad.sin() * half];
        draw_stroke(
            &mut img,
            from,
            to,
            stroke_color,
            &mut rng,
            noise.pixel_jitter * 0.5,
            Some(&mask),
        );
    }

    Ok(SyntheticScene {
        image: img,
        mask,
        pose,
        noise: *noise,
        seed,
    })
}

/// Number of dyadic leaves the search grid over `cell` contains.
pub fn grid_leaf_count(cell: &PoseCell, resolutions: &[f64; 6]) -> u64 {
    let mut total = 1u64;
    for (i, res) in resolutions.iter().enumerate() {
        let width = cell.axis(i).width();
        if width <= *res + 1e-12 {
            continue;
        }
        let splits = (width / res).log2().ceil() as u32;
        total = total.saturating_mul(1u64 << splits.min(63));
    }
    total
}

/// Exhaustively scores every dyadic leaf of the grid and returns the best
/// pose with its exact score. Refuses grids above `MAX_GRID_POSES` leaves.
pub fn brute_force_pose(
    ctx: &ScoreContext,
    root: &PoseCell,
    resolutions: &[f64; 6],
) -> Result<(Pose, f64), SynthError> {
    let leaves = grid_leaf_count(root, resolutions);
    if leaves > MAX_GRID_POSES {
        return Err(SynthError::GridTooLarge(leaves));
    }
    Ok(bnb::exhaustive_best(ctx, root, resolutions))
}

/// Exhaustively enumerates all labelings of a small cut problem and returns
/// a minimizer with its exact energy. Refuses problems above
/// `MAX_SEG_NODES` nodes.
pub fn brute_force_seg(prob: &CutProblem) -> Result<(Segmentation, f64), SynthError> {
    let n = prob.unary.len();
    if n > MAX_SEG_NODES {
        return Err(SynthError::TooManyNodes(n));
    }
    let mut best_bits = 0u32;
    let mut best = f64::INFINITY;
    let mut labels = vec![false; n];
    for bits in 0u32..(1u32 << n) {
        for (i, l) in labels.iter_mut().enumerate() {
            *l = bits >> i & 1 == 1;
        }
        let e = prob.energy_of(&labels);
        if e < best {
            best = e;
            best_bits = bits;
        }
    }
    for (i, l) in labels.iter_mut().enumerate() {
        *l = best_bits >> i & 1 == 1;
    }
    Ok((labels, best))
}

/// Writes `n` scenes plus a manifest under `dir`. Per-scene files are
/// `scene_NNN.png`, `scene_NNN_mask.png`, `scene_NNN_pose.txt`; the manifest
/// lists one `image mask pose` triple per line. Scene `i` is generated with
/// seed `seed + i`, so any scene regenerates independently.
pub fn write_suite(
    dir: &Path,
    model: &WireframeModel,
    n: usize,
    noise: &NoiseParams,
    seed: u64,
) -> Result<PathBuf, SynthError> {
    fs::create_dir_all(dir)?;
    let mut manifest = String::new();
    for i in 0..n {
        let scene = generate(model, None, noise, seed + i as u64)?;
        let image = format!("scene_{i:03}.png");
        let mask = format!("scene_{i:03}_mask.png");
        let pose = format!("scene_{i:03}_pose.txt");
        scene.image.save(dir.join(&image))?;
        scene.mask.save_png(&dir.join(&mask))?;
        scene.pose.save(&dir.join(&pose))?;
        manifest.push_str(&format!("{image} {mask} {pose}\n"));
    }
    let path = dir.join("manifest.txt");
    fs::write(&path, manifest)?;
    Ok(path)
}

/// One line of a dataset manifest, with paths resolved against its directory.
#[derive(Debug, Clone)]
pub struct ManifestEntry {
    pub image: PathBuf,
    pub mask: PathBuf,
    pub pose: PathBuf,
}

/// Parses a manifest of `image mask pose` lines; relative paths resolve
/// against the manifest's directory.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>, SynthError> {
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let text = fs::read_to_string(path)?;
    let mut entries = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(img), Some(mask), Some(pose)) = (parts.next(), parts.next(), parts.next())
        else {
            return Err(SynthError::Io(std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("manifest line needs three paths: {line:?}"),
            )));
        };
        entries.push(ManifestEntry {
            image: base.join(img),
            mask: base.join(mask),
            pose: base.join(pose),
        });
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color_model::ColorModel;
    use crate::energy::{EnergyWeights, ModelKind, SceneData, SceneOptions};
    use crate::features::{extract_features, GrayImage, GridLayout};
    use crate::mincut::min_cut;
    use crate::wireframe::{gen_box, visible_bins};
    use rand::Rng;

    fn test_model() -> WireframeModel {
        gen_box(4.0, 1.8, 1.5, 4)
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let model = test_model();
        let a = generate(&model, None, &NoiseParams::noisy(), 99).unwrap();
        let b = generate(&model, None, &NoiseParams::noisy(), 99).unwrap();
        assert_eq!(a.image.as_raw(), b.image.as_raw());
        assert_eq!(a.mask, b.mask);
        assert_eq!(a.pose.to_line(), b.pose.to_line());
        let c = generate(&model, None, &NoiseParams::noisy(), 100).unwrap();
        assert_ne!(a.image.as_raw(), c.image.as_raw());
    }

    #[test]
    fn mask_is_exactly_the_projection_hull() {
        let model = test_model();
        let scene = generate(&model, None, &NoiseParams::noisy(), 5).unwrap();
        let cam = Camera::new(SCENE_WIDTH, SCENE_HEIGHT);
        let hull = projection_hull(&model, &scene.pose, &cam);
        assert_eq!(scene.mask, hull);
    }

    #[test]
    fn off_image_pose_is_an_error() {
        let model = test_model();
        let pose = Pose {
            azimuth: 30.0,
            elevation: 1.0,
            tilt: 0.0,
            depth: 10.0,
            img_u: 170.0,
            img_v: 0.0,
        };
        match generate(&model, Some(pose), &NoiseParams::noiseless(), 1) {
            Err(SynthError::OffImage) => {}
            other => panic!("expected OffImage, got {other:?}"),
        }
    }

    fn to_gray(img: &RgbImage) -> GrayImage {
        let mut g = GrayImage::new(img.width(), img.height());
        for y in 0..img.height() {
            for x in 0..img.width() {
                let p = img.get_pixel(x, y).0;
                let v =
                    (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64) / 255.0;
                g.set(x as usize, y as usize, v);
            }
        }
        g
    }

    #[test]
    fn noiseless_features_peak_at_projected_primitive_bins() {
        let model = test_model();
        let pose = Pose {
            azimuth: 40.0,
            elevation: 1.0,
            tilt: 0.0,
            depth: 9.0,
            img_u: 0.0,
            img_v: 0.0,
        };
        let scene = generate(&model, Some(pose), &NoiseParams::noiseless(), 3).unwrap();
        let cam = Camera::new(SCENE_WIDTH, SCENE_HEIGHT);
        let layout = GridLayout::for_camera(&cam);
        let grid = extract_features(&to_gray(&scene.image), layout).unwrap();
        let max = grid.max_value();
        assert!(max > 0.5, "features too weak: {max}");
        let bins: Vec<_> = visible_bins(&model, &scene.pose, &cam, &layout)
            .into_iter()
            .flatten()
            .collect();
        assert!(!bins.is_empty());
        let peak_hit = bins.iter().any(|b| grid.get(b.u, b.v, b.w) == max);
        assert!(peak_hit, "no projected primitive bin attains the max");
        let mean_at_bins: f64 = bins.iter().map(|b| grid.get(b.u, b.v, b.w)).sum::<f64>()
            / bins.len() as f64;
        assert!(mean_at_bins > 0.6, "weak response at bins: {mean_at_bins}");
    }

    #[test]
    fn area_distribution_is_within_pinned_band() {
        let model = test_model();
        let mut total = 0usize;
        for seed in 0..50u64 {
            let scene = generate(&model, None, &NoiseParams::noisy(), seed).unwrap();
            let area = scene.mask.area();
            assert!(
                (MIN_FG_AREA..=MAX_FG_AREA).contains(&area),
                "seed {seed} area {area} outside band"
            );
            total += area;
        }
        let mean = total as f64 / 50.0;
        assert!(
            (1200.0..=5200.0).contains(&mean),
            "mean fg area {mean} outside pinned band"
        );
    }

    #[test]
    fn brute_force_pose_refuses_large_grids() {
        let model = test_model();
        let scene = generate(&model, None, &NoiseParams::noiseless(), 11).unwrap();
        let weights = EnergyWeights::new(ModelKind::Shape, [0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let cm = ColorModel::train_from_mask(&scene.image, &scene.mask, 0).unwrap();
        let data =
            SceneData::build(&scene.image, model.clone(), &cm, SceneOptions::default()).unwrap();
        let ctx = ScoreContext::detection(&data, &weights);
        let root = bnb::default_ranges();
        let res = bnb::default_resolutions();
        let leaves = grid_leaf_count(&root, &res);
        assert!(leaves > MAX_GRID_POSES, "default grid should be huge: {leaves}");
        match brute_force_pose(&ctx, &root, &res) {
            Err(SynthError::GridTooLarge(n)) => assert_eq!(n, leaves),
            other => panic!("expected GridTooLarge, got {other:?}"),
        }
    }

    #[test]
    fn brute_force_pose_finds_true_pose_on_noiseless_scene() {
        let model = test_model();
        let truth = Pose {
            azimuth: 65.0,
            elevation: 1.2,
            tilt: 0.0,
            depth: 9.0,
            img_u: 1.0,
            img_v: -0.5,
        };
        let scene = generate(&model, Some(truth), &NoiseParams::noiseless(), 21).unwrap();
        let weights = EnergyWeights::new(ModelKind::Shape, [0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let cm = ColorModel::train_from_mask(&scene.image, &scene.mask, 0).unwrap();
        let data =
            SceneData::build(&scene.image, model.clone(), &cm, SceneOptions::default()).unwrap();
        let ctx = ScoreContext::detection(&data, &weights);
        // A grid whose leaf centers include the true pose: each split axis
        // spans two leaves with the truth at one center.
        let res = [5.625, 0.75, 0.0, 1.0, 3.4375, 3.4375];
        let root = PoseCell::from_ranges(
            (truth.azimuth - res[0] / 2.0, truth.azimuth + 1.5 * res[0]),
            (truth.elevation - res[1] / 2.0, truth.elevation + 1.5 * res[1]),
            (0.0, 0.0),
            (truth.depth - res[3] / 2.0, truth.depth + 1.5 * res[3]),
            (truth.img_u - res[4] / 2.0, truth.img_u + 1.5 * res[4]),
            (truth.img_v - res[5] / 2.0, truth.img_v + 1.5 * res[5]),
        );
        let (best, score) = brute_force_pose(&ctx, &root, &res).unwrap();
        assert!(score > 0.0);
        let bc = best.to_cell();
        let tc = truth.to_cell();
        for i in 0..6 {
            let (b, t) = (bc.axis(i).mid(), tc.axis(i).mid());
            assert!((b - t).abs() < 1e-9, "best {best:?} vs truth {truth:?}");
        }
    }

    #[test]
    fn brute_force_seg_matches_min_cut() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..30 {
            let n = rng.gen_range(1..=10usize);
            let unary = (0..n)
                .map(|_| (rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)))
                .collect::<Vec<_>>();
            let mut edges = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    if rng.gen_bool(0.3) {
                        edges.push((i, j, rng.gen_range(0.0..2.0)));
                    }
                }
            }
            let prob = CutProblem { unary, edges };
            let (labels, value) = brute_force_seg(&prob).unwrap();
            assert!((prob.energy_of(&labels) - value).abs() < 1e-12);
            let cut = min_cut(&prob).unwrap();
            assert!(
                (cut.energy - value).abs() <= 1e-9 * (1.0 + value.abs()),
                "cut {} vs brute {}",
                cut.energy,
                value
            );
        }
    }

    #[test]
    fn brute_force_seg_refuses_large_problems() {
        let prob = CutProblem {
            unary: vec![(0.0, 0.0); 21],
            edges: vec![],
        };
        match brute_force_seg(&prob) {
            Err(SynthError::TooManyNodes(21)) => {}
            other => panic!("expected TooManyNodes, got {other:?}"),
        }
    }

    #[test]
    fn suite_round_trips_through_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let model = test_model();
        let manifest =
            write_suite(dir.path(), &model, 3, &NoiseParams::noisy(), 42).unwrap();
        let entries = read_manifest(&manifest).unwrap();
        assert_eq!(entries.len(), 3);
        for (i, entry) in entries.iter().enumerate() {
            let img = image::open(&entry.image).unwrap().into_rgb8();
            let mask = ProjectionMask::load_png(&entry.mask).unwrap();
            let pose = Pose::load(&entry.pose).unwrap();
            let scene =
                generate(&model, None, &NoiseParams::noisy(), 42 + i as u64).unwrap();
            assert_eq!(img.as_raw(), scene.image.as_raw());
            assert_eq!(mask, scene.mask);
            assert_eq!(pose.to_line(), scene.pose.to_line());
        }
    }
}

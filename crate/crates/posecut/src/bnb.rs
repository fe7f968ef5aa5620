//! Best-first branch-and-bound over pose cells.
//!
//! The queue is ordered by certified upper bounds. Popping a cell that is
//! already at resolution triggers an exact evaluation at its center, and the
//! cell is re-queued with that exact score; the search ends when the popped
//! entry carries an exact score, which therefore dominates every remaining
//! bound. The returned score equals the best leaf-center score of the
//! dyadic subdivision, so an exhaustive scan of the same leaves finds the
//! identical value.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::bounds::{BoundReport, ScoreContext};
use crate::color_model::HintBox;
use crate::geometry::{Pose, PoseCell};
use crate::interval::Interval;

/// Search ranges from the standard configuration: full azimuth circle,
/// street-level camera heights, depths 4-50 m, translations inside a 55
/// degree field of view, no camera tilt.
pub fn default_ranges() -> PoseCell {
    PoseCell::from_ranges(
        (-180.0, 180.0),
        (0.0, 3.0),
        (0.0, 0.0),
        (4.0, 50.0),
        (-27.5, 27.5),
        (-27.5, 27.5),
    )
}

/// Finest cell widths per axis, dyadic fractions of the default ranges:
/// 5.625 degrees azimuth, 0.75 m elevation, 1.4375 m depth, 3.4375 degrees
/// image translation.
pub fn default_resolutions() -> [f64; 6] {
    [360.0 / 64.0, 0.75, 0.0, 46.0 / 32.0, 55.0 / 16.0, 55.0 / 16.0]
}

#[derive(Debug, Error)]
pub enum BnbError {
    #[error("hint infeasible: no pose in the search range matches the hint box")]
    HintInfeasible,
    #[error("axis {0} has positive width but zero resolution")]
    ZeroResolution(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnbStatus {
    /// Popped an exactly-scored at-resolution cell: certified optimum over
    /// the dyadic leaves.
    Completed,
    /// The per-pop visitor requested an early stop.
    Stopped,
}

#[derive(Debug, Clone)]
pub struct BnbResult {
    pub status: BnbStatus,
    pub best_cell: PoseCell,
    pub best_pose: Pose,
    pub best_score: f64,
    pub pops: usize,
    pub exact_evals: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Visit {
    Continue,
    Stop,
}

pub fn branch_and_bound(
    ctx: &ScoreContext,
    root: PoseCell,
    resolutions: [f64; 6],
    hint: Option<&HintBox>,
) -> Result<BnbResult, BnbError> {
    search(ctx, root, resolutions, hint, |_, _| Visit::Continue)
}

/// Coarse-to-fine search: a full search at `coarse` resolutions, then a
/// second search at `fine` resolutions restricted to a small window around
/// the coarse winner. Far cheaper than searching the whole range at `fine`,
/// at the cost of assuming the coarse winner lands near the fine optimum.
/// The window spans two coarse steps each way in azimuth (the orientation
/// histogram bins are wider than an azimuth step, so the coarse winner is
/// least reliable there) and one step on every other axis.
///
/// When the refined azimuth window would cross the end of a full-circle
/// range, the window is split into its two in-range pieces and both are
/// searched, so the bound machinery never sees angles outside the range.
pub fn coarse_to_fine(
    ctx: &ScoreContext,
    root: PoseCell,
    coarse: [f64; 6],
    fine: [f64; 6],
    hint: Option<&HintBox>,
) -> Result<BnbResult, BnbError> {
    let first = branch_and_bound(ctx, root, coarse, hint)?;
    let c = first.best_pose.to_cell();

    let window = |i: usize| {
        let full = root.axis(i);
        if full.width() == 0.0 || coarse[i] <= 0.0 {
            return full;
        }
        let margin = if i == 0 { 2.0 } else { 1.0 } * coarse[i];
        let mid = c.axis(i).mid();
        Interval::new(mid - margin, mid + margin)
    };

    let mut narrowed = root;
    for i in 1..6 {
        let full = root.axis(i);
        let w = window(i);
        narrowed = narrowed.with_axis(i, Interval::new(w.lo.max(full.lo), w.hi.min(full.hi)));
    }

    let full_a = root.axis(0);
    let wa = window(0);
    let wraps = full_a.width() >= 360.0;
    let mut pieces = Vec::new();
    if wraps && wa.lo < full_a.lo {
        pieces.push(Interval::new(wa.lo + 360.0, full_a.hi));
        pieces.push(Interval::new(full_a.lo, wa.hi));
    } else if wraps && wa.hi > full_a.hi {
        pieces.push(Interval::new(wa.lo, full_a.hi));
        pieces.push(Interval::new(full_a.lo, wa.hi - 360.0));
    } else {
        pieces.push(Interval::new(wa.lo.max(full_a.lo), wa.hi.min(full_a.hi)));
    }

    let mut best: Option<BnbResult> = None;
    let mut pops = first.pops;
    let mut exact_evals = first.exact_evals;
    for piece in pieces {
        let res = branch_and_bound(ctx, narrowed.with_axis(0, piece), fine, hint)?;
        pops += res.pops;
        exact_evals += res.exact_evals;
        if best.as_ref().map_or(true, |b| res.best_score > b.best_score) {
            best = Some(res);
        }
    }
    let best = best.expect("at least one azimuth piece");
    Ok(BnbResult {
        pops,
        exact_evals,
        ..best
    })
}

/// Full search driver. `on_pop` sees every popped cell (with the priority it
/// was popped at) before it is split, and may stop the search.
pub fn search(
    ctx: &ScoreContext,
    root: PoseCell,
    resolutions: [f64; 6],
    hint: Option<&HintBox>,
    mut on_pop: impl FnMut(&PoseCell, f64) -> Visit,
) -> Result<BnbResult, BnbError> {
    for i in 0..6 {
        if root.axis(i).width() > 0.0 && resolutions[i] <= 0.0 {
            return Err(BnbError::ZeroResolution(i));
        }
    }
    let root = match hint {
        Some(h) => restrict_to_hint(ctx, root, resolutions, h)?,
        None => root,
    };

    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    let mut pops = 0usize;
    let mut exact_evals = 0usize;
    let mut best: Option<(PoseCell, Pose, f64)> = None;

    let report = ctx.bound(&root);
    heap.push(Entry::bounded(root, report, &mut seq));

    while let Some(entry) = heap.pop() {
        pops += 1;
        let prio = entry.prio;
        if on_pop(&entry.cell, prio) == Visit::Stop {
            let (best_cell, best_pose, best_score) = best_or(&entry.cell, ctx, best);
            return Ok(BnbResult {
                status: BnbStatus::Stopped,
                best_cell,
                best_pose,
                best_score,
                pops,
                exact_evals,
            });
        }
        if entry.exact {
            let pose = entry.cell.center();
            return Ok(BnbResult {
                status: BnbStatus::Completed,
                best_cell: entry.cell,
                best_pose: pose,
                best_score: prio,
                pops,
                exact_evals,
            });
        }
        match split_axis(&entry.cell, &resolutions) {
            None => {
                let pose = entry.cell.center();
                let score = ctx.exact_score(&pose);
                exact_evals += 1;
                if best.as_ref().map_or(true, |b| score > b.2) {
                    best = Some((entry.cell.clone(), pose, score));
                }
                heap.push(Entry::exact(entry.cell, score, &mut seq));
            }
            Some(axis) => {
                let (lo, hi) = entry.cell.split(axis);
                for child in [lo, hi] {
                    let mut report = ctx.bound(&child);
                    report.clamp_to(&entry.report);
                    heap.push(Entry::bounded(child, report, &mut seq));
                }
            }
        }
    }
    unreachable!("queue never empties before an exact pop");
}

fn best_or(
    fallback: &PoseCell,
    ctx: &ScoreContext,
    best: Option<(PoseCell, Pose, f64)>,
) -> (PoseCell, Pose, f64) {
    match best {
        Some(b) => b,
        None => {
            let pose = fallback.center();
            let score = ctx.exact_score(&pose);
            (fallback.clone(), pose, score)
        }
    }
}

/// Splitting rule: the axis whose width is largest relative to its target
/// resolution; `None` when every axis is at resolution.
pub fn split_axis(cell: &PoseCell, resolutions: &[f64; 6]) -> Option<usize> {
    let widths = cell.widths();
    let mut best: Option<(usize, f64)> = None;
    for i in 0..6 {
        if widths[i] <= resolutions[i] + 1e-12 {
            continue;
        }
        let ratio = widths[i] / resolutions[i].max(1e-12);
        if best.map_or(true, |(_, r)| ratio > r) {
            best = Some((i, ratio));
        }
    }
    best.map(|(i, _)| i)
}

/// Restricts the root: image translation clamped to 5 degrees around the
/// hint box center, depth slices kept only where the projected model's
/// bounding box can reach 0.5 overlap with the hint.
fn restrict_to_hint(
    ctx: &ScoreContext,
    root: PoseCell,
    resolutions: [f64; 6],
    hint: &HintBox,
) -> Result<PoseCell, BnbError> {
    let cam = &ctx.scene.cam;
    let [cx, cy] = hint.center();
    let [px, py] = cam.principal_point();
    let ppd = cam.px_per_deg();
    let u_hint = (cx - px) / ppd;
    let v_hint = (cy - py) / ppd;

    let clamp = |iv: crate::interval::Interval, c: f64| {
        let lo = iv.lo.max(c - 5.0);
        let hi = iv.hi.min(c + 5.0);
        if lo > hi {
            None
        } else {
            Some(crate::interval::Interval::new(lo, hi))
        }
    };
    let u = clamp(root.u, u_hint).ok_or(BnbError::HintInfeasible)?;
    let v = clamp(root.v, v_hint).ok_or(BnbError::HintInfeasible)?;

    let d_res = resolutions[3].max(1e-6);
    let n_slices = ((root.d.width() / d_res).ceil() as usize).max(1);
    let b_mid = root.b.mid();
    let mut d_lo = f64::INFINITY;
    let mut d_hi = f64::NEG_INFINITY;
    for k in 0..n_slices {
        let lo = root.d.lo + k as f64 * d_res;
        let hi = (lo + d_res).min(root.d.hi);
        let mid = 0.5 * (lo + hi);
        let feasible = [0.0, 45.0, 90.0, 135.0].iter().any(|&az| {
            let pose = Pose::new(az, b_mid.min(mid * 0.9), 0.0, mid, u_hint, v_hint);
            projected_box(ctx, &pose).map_or(false, |b| b.iou(hint) > 0.5)
        });
        if feasible {
            d_lo = d_lo.min(lo);
            d_hi = d_hi.max(hi);
        }
    }
    if d_lo > d_hi {
        return Err(BnbError::HintInfeasible);
    }
    Ok(root
        .with_axis(3, crate::interval::Interval::new(d_lo, d_hi))
        .with_axis(4, u)
        .with_axis(5, v))
}

/// Bounding box of the visible projected primitives, `None` when nothing
/// projects in front of the camera.
pub fn projected_box(ctx: &ScoreContext, pose: &Pose) -> Option<HintBox> {
    crate::hull::projected_bbox(&ctx.scene.model, pose, &ctx.scene.cam)
}

struct Entry {
    prio: f64,
    seq: u64,
    exact: bool,
    cell: PoseCell,
    report: BoundReport,
}

impl Entry {
    fn bounded(cell: PoseCell, report: BoundReport, seq: &mut u64) -> Self {
        *seq += 1;
        Entry {
            prio: report.total,
            seq: *seq,
            exact: false,
            cell,
            report,
        }
    }

    fn exact(cell: PoseCell, score: f64, seq: &mut u64) -> Self {
        *seq += 1;
        let report = BoundReport {
            shape: 0.0,
            intersection: 0.0,
            union_term: 0.0,
            total: score,
            largest_params: (0.0, 0.0, 0.0, 0.0),
            smallest_params: (0.0, 0.0, 0.0, 0.0),
            s: [0.0; 5],
        };
        Entry {
            prio: score,
            seq: *seq,
            exact: true,
            cell,
            report,
        }
    }
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.prio == other.prio && self.seq == other.seq
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        match self.prio.partial_cmp(&other.prio) {
            Some(Ordering::Equal) | None => other.seq.cmp(&self.seq),
            Some(ord) => ord,
        }
    }
}

/// Evaluates the exact center score of every dyadic leaf; the reference for
/// the branch-and-bound result.
pub fn exhaustive_best(ctx: &ScoreContext, cell: &PoseCell, resolutions: &[f64; 6]) -> (Pose, f64) {
    match split_axis(cell, resolutions) {
        None => {
            let pose = cell.center();
            let score = ctx.exact_score(&pose);
            (pose, score)
        }
        Some(axis) => {
            let (lo, hi) = cell.split(axis);
            let a = exhaustive_best(ctx, &lo, resolutions);
            let b = exhaustive_best(ctx, &hi, resolutions);
            if a.1 >= b.1 {
                a
            } else {
                b
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color_model::ColorModel;
    use crate::geometry::Frame;
    use crate::energy::{EnergyWeights, ModelKind, SceneData, SceneOptions, Segmentation};
    use crate::superpixels::SuperpixelMode;
    use crate::wireframe::{gen_box, visibility};
    use image::RgbImage;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn test_scene(seed: u64) -> SceneData {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut img = RgbImage::new(160, 120);
        for p in img.pixels_mut() {
            p.0 = [rng.gen(), rng.gen(), rng.gen()];
        }
        let hint = HintBox {
            x: 40.0,
            y: 30.0,
            w: 80.0,
            h: 60.0,
        };
        let colors = ColorModel::train_from_hint(&img, &hint, seed).unwrap();
        SceneData::build(
            &img,
            gen_box(4.0, 1.8, 1.5, 4),
            &colors,
            SceneOptions {
                superpixel_target: 60,
                superpixel_mode: SuperpixelMode::Grid,
                seed,
            },
        )
        .unwrap()
    }

    fn coarse_root() -> PoseCell {
        PoseCell::from_ranges(
            (-180.0, 180.0),
            (0.0, 3.0),
            (0.0, 0.0),
            (6.0, 14.0),
            (-6.875, 6.875),
            (-6.875, 6.875),
        )
    }

    fn coarse_res() -> [f64; 6] {
        [45.0, 1.5, 0.0, 2.0, 6.875, 6.875]
    }

    #[test]
    fn point_range_returns_immediately() {
        let scene = test_scene(1);
        let w = EnergyWeights::new(ModelKind::Volume, [0.5, 0.3, 1.0, 0.002, 0.002]).unwrap();
        let ctx = ScoreContext::detection(&scene, &w);
        let pose = Pose::new(30.0, 1.0, 0.0, 10.0, 2.0, -1.0);
        let res = branch_and_bound(&ctx, pose.to_cell(), default_resolutions(), None).unwrap();
        assert_eq!(res.status, BnbStatus::Completed);
        assert_eq!(res.best_score, ctx.exact_score(&pose));
        assert!(res.pops <= 2);
    }

    #[test]
    fn matches_exhaustive_grid() {
        let w = EnergyWeights::new(ModelKind::Volume, [0.5, 0.3, 1.0, 0.002, 0.002]).unwrap();
        for seed in 0..6u64 {
            let scene = test_scene(seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
            let det = ScoreContext::detection(&scene, &w);
            let bnb = branch_and_bound(&det, coarse_root(), coarse_res(), None).unwrap();
            let (_, grid_best) = exhaustive_best(&det, &coarse_root(), &coarse_res());
            assert_eq!(
                bnb.best_score, grid_best,
                "detection optimum mismatch on scene {seed}"
            );

            let x: Segmentation = (0..scene.n()).map(|_| rng.gen_bool(0.4)).collect();
            let seg = ScoreContext::given_seg(&scene, &w, &x);
            let bnb = branch_and_bound(&seg, coarse_root(), coarse_res(), None).unwrap();
            let (_, grid_best) = exhaustive_best(&seg, &coarse_root(), &coarse_res());
            assert_eq!(
                bnb.best_score, grid_best,
                "pose-given-seg optimum mismatch on scene {seed}"
            );
        }
    }

    fn rendered_scene() -> (SceneData, Pose) {
        let model = gen_box(4.0, 1.8, 1.5, 4);
        let pose = Pose::new(45.0, 1.0, 0.0, 8.0, 0.0, 0.0);
        let cam = crate::geometry::Camera::new(160, 120);
        let frame = Frame::new(&pose, &cam);
        let mut img = RgbImage::new(160, 120);
        for p in img.pixels_mut() {
            p.0 = [110, 110, 110];
        }
        // strokes along the model edges make the detection score peak there
        for edge in model.primitives.chunks(4) {
            for pair in edge.windows(2) {
                if !visibility(&pair[0], &frame) || !visibility(&pair[1], &frame) {
                    continue;
                }
                let (Some(a), Some(b)) = (frame.project(pair[0].p), frame.project(pair[1].p))
                else {
                    continue;
                };
                let steps = 40;
                for s in 0..=steps {
                    let t = s as f64 / steps as f64;
                    let x = a[0] + t * (b[0] - a[0]);
                    let y = a[1] + t * (b[1] - a[1]);
                    if x >= 0.0 && y >= 0.0 && x < 160.0 && y < 120.0 {
                        img.put_pixel(x as u32, y as u32, image::Rgb([255, 255, 255]));
                    }
                }
            }
        }
        let hint = HintBox {
            x: 40.0,
            y: 30.0,
            w: 80.0,
            h: 60.0,
        };
        let colors = ColorModel::train_from_hint(&img, &hint, 0).unwrap();
        let scene = SceneData::build(
            &img,
            model,
            &colors,
            SceneOptions {
                superpixel_target: 60,
                superpixel_mode: SuperpixelMode::Grid,
                seed: 0,
            },
        )
        .unwrap();
        (scene, pose)
    }

    #[test]
    fn bnb_explores_fewer_cells_than_grid() {
        let (scene, _) = rendered_scene();
        let w = EnergyWeights::new(ModelKind::Shape, [0.5, 0.3, 1.0, 0.0, 0.0]).unwrap();
        let ctx = ScoreContext::detection(&scene, &w);
        let root = PoseCell::from_ranges(
            (-180.0, 180.0),
            (0.0, 1.5),
            (0.0, 0.0),
            (6.0, 10.0),
            (-3.4375, 3.4375),
            (-3.4375, 3.4375),
        );
        let res = [5.625, 0.75, 0.0, 0.5, 55.0 / 32.0, 55.0 / 32.0];
        let bnb = branch_and_bound(&ctx, root.clone(), res, None).unwrap();
        let mut leaves = 0usize;
        fn count(cell: &PoseCell, res: &[f64; 6], n: &mut usize) {
            match split_axis(cell, res) {
                None => *n += 1,
                Some(ax) => {
                    let (a, b) = cell.split(ax);
                    count(&a, res, n);
                    count(&b, res, n);
                }
            }
        }
        count(&root, &res, &mut leaves);
        assert!(
            bnb.exact_evals < leaves,
            "bnb evaluated {} leaves of {leaves}",
            bnb.exact_evals
        );
    }

    #[test]
    fn hint_clamps_translation_and_depth() {
        let scene = test_scene(4);
        let w = EnergyWeights::new(ModelKind::Volume, [0.5, 0.3, 1.0, 0.002, 0.002]).unwrap();
        let ctx = ScoreContext::detection(&scene, &w);
        // place the true object and take its projected box as the hint
        let true_pose = Pose::new(60.0, 1.0, 0.0, 10.0, 3.0, 1.0);
        let hint = projected_box(&ctx, &true_pose).unwrap();
        let res = branch_and_bound(
            &ctx,
            default_ranges(),
            default_resolutions(),
            Some(&hint),
        )
        .unwrap();
        let [cx, _] = hint.center();
        let [px, _] = scene.cam.principal_point();
        let u_hint = (cx - px) / scene.cam.px_per_deg();
        assert!((res.best_pose.img_u - u_hint).abs() <= 5.0 + 1e-9);
        // depth pruning keeps the true depth reachable
        assert!(res.best_cell.d.lo <= 10.0 && 10.0 <= res.best_cell.d.hi + 10.0);
    }

    #[test]
    fn infeasible_hint_is_an_error() {
        let scene = test_scene(5);
        let w = EnergyWeights::new(ModelKind::Volume, [0.5, 0.3, 1.0, 0.002, 0.002]).unwrap();
        let ctx = ScoreContext::detection(&scene, &w);
        // a hint far outside the translation range
        let hint = HintBox {
            x: -4000.0,
            y: -4000.0,
            w: 10.0,
            h: 10.0,
        };
        match branch_and_bound(&ctx, default_ranges(), default_resolutions(), Some(&hint)) {
            Err(BnbError::HintInfeasible) => {}
            other => panic!("expected hint infeasible, got {other:?}"),
        }
        // a hint box so small no depth in range matches it
        let hint = HintBox {
            x: 79.0,
            y: 59.0,
            w: 2.0,
            h: 2.0,
        };
        match branch_and_bound(&ctx, default_ranges(), default_resolutions(), Some(&hint)) {
            Err(BnbError::HintInfeasible) => {}
            other => panic!("expected hint infeasible, got {other:?}"),
        }
    }

    #[test]
    fn visitor_can_stop_early() {
        let scene = test_scene(6);
        let w = EnergyWeights::new(ModelKind::Volume, [0.5, 0.3, 1.0, 0.002, 0.002]).unwrap();
        let ctx = ScoreContext::detection(&scene, &w);
        let mut seen = 0;
        let res = search(&ctx, coarse_root(), coarse_res(), None, |_, _| {
            seen += 1;
            if seen >= 3 {
                Visit::Stop
            } else {
                Visit::Continue
            }
        })
        .unwrap();
        assert_eq!(res.status, BnbStatus::Stopped);
        assert_eq!(res.pops, 3);
    }
}


//! Evaluation metrics: per-class segmentation I/U, detection and oriented
//! detection accuracy, azimuth error, and 8-way azimuth classification.

use std::fmt::Write as _;

use crate::color_model::HintBox;
use crate::geometry::{Camera, Pose};
use crate::hull::{projected_bbox, ProjectionMask};
use crate::wireframe::WireframeModel;

/// Wrapped absolute azimuth difference in degrees, in [0, 180].
pub fn azimuth_error_deg(a: f64, a_star: f64) -> f64 {
    let d = (a - a_star).rem_euclid(360.0);
    d.min(360.0 - d)
}

/// Index of the 45-degree azimuth bin centered on 0, 45, ..., 315 degrees.
pub fn azimuth_bin(a: f64) -> usize {
    (((a + 22.5).rem_euclid(360.0)) / 45.0) as usize % 8
}

/// Per-class and mean intersection-over-union between two binary masks.
#[derive(Debug, Clone, Copy)]
pub struct SegScores {
    pub fg_iou: f64,
    pub bg_iou: f64,
    pub mean_iou: f64,
}

pub fn seg_scores(pred: &ProjectionMask, gt: &ProjectionMask) -> SegScores {
    assert_eq!((pred.width, pred.height), (gt.width, gt.height));
    let (mut fg_i, mut fg_u, mut bg_i, mut bg_u) = (0usize, 0usize, 0usize, 0usize);
    for (p, g) in pred.as_slice().iter().zip(gt.as_slice()) {
        fg_i += (*p && *g) as usize;
        fg_u += (*p || *g) as usize;
        bg_i += (!*p && !*g) as usize;
        bg_u += (!*p || !*g) as usize;
    }
    let ratio = |i: usize, u: usize| if u == 0 { 1.0 } else { i as f64 / u as f64 };
    let fg_iou = ratio(fg_i, fg_u);
    let bg_iou = ratio(bg_i, bg_u);
    SegScores {
        fg_iou,
        bg_iou,
        mean_iou: 0.5 * (fg_iou + bg_iou),
    }
}

/// One scene's evaluation record.
#[derive(Debug, Clone, Copy)]
pub struct SceneMetrics {
    pub fg_iou: f64,
    pub bg_iou: f64,
    pub mean_iou: f64,
    pub box_iou: f64,
    pub azimuth_error: f64,
    /// Projected bounding box overlaps ground truth with I/U > 0.5.
    pub detected: bool,
    /// Detected and azimuth error below 20 degrees.
    pub oriented: bool,
    /// Predicted azimuth falls in the same 45-degree bin as ground truth.
    pub azimuth_bin_hit: bool,
}

pub fn evaluate_scene(
    model: &WireframeModel,
    cam: &Camera,
    pred_mask: &ProjectionMask,
    gt_mask: &ProjectionMask,
    pred_pose: &Pose,
    gt_pose: &Pose,
) -> SceneMetrics {
    let seg = seg_scores(pred_mask, gt_mask);
    let pred_box = projected_bbox(model, pred_pose, cam);
    let gt_box = HintBox::of_mask(gt_mask);
    let box_iou = match (pred_box, gt_box) {
        (Some(p), Some(g)) => p.iou(&g),
        _ => 0.0,
    };
    let azimuth_error = azimuth_error_deg(pred_pose.azimuth, gt_pose.azimuth);
    let detected = box_iou > 0.5;
    SceneMetrics {
        fg_iou: seg.fg_iou,
        bg_iou: seg.bg_iou,
        mean_iou: seg.mean_iou,
        box_iou,
        azimuth_error,
        detected,
        oriented: detected && azimuth_error < 20.0,
        azimuth_bin_hit: azimuth_bin(pred_pose.azimuth) == azimuth_bin(gt_pose.azimuth),
    }
}

/// Averages over a suite of evaluated scenes.
#[derive(Debug, Clone, Copy)]
pub struct SuiteSummary {
    pub scenes: usize,
    pub mean_fg_iou: f64,
    pub mean_bg_iou: f64,
    pub mean_iou: f64,
    pub mean_box_iou: f64,
    pub mean_azimuth_error: f64,
    pub detection_accuracy: f64,
    pub oriented_accuracy: f64,
    pub azimuth_accuracy: f64,
}

pub fn summarize(rows: &[SceneMetrics]) -> SuiteSummary {
    let n = rows.len();
    let avg = |f: &dyn Fn(&SceneMetrics) -> f64| {
        if n == 0 {
            0.0
        } else {
            rows.iter().map(f).sum::<f64>() / n as f64
        }
    };
    SuiteSummary {
        scenes: n,
        mean_fg_iou: avg(&|r| r.fg_iou),
        mean_bg_iou: avg(&|r| r.bg_iou),
        mean_iou: avg(&|r| r.mean_iou),
        mean_box_iou: avg(&|r| r.box_iou),
        mean_azimuth_error: avg(&|r| r.azimuth_error),
        detection_accuracy: avg(&|r| r.detected as u8 as f64),
        oriented_accuracy: avg(&|r| r.oriented as u8 as f64),
        azimuth_accuracy: avg(&|r| r.azimuth_bin_hit as u8 as f64),
    }
}

/// Per-scene rows plus a trailing `mean` row, as CSV text.
pub fn to_csv(rows: &[SceneMetrics]) -> String {
    let mut out = String::from(
        "scene,fg_iou,bg_iou,mean_iou,box_iou,azimuth_error,detected,oriented,azimuth_bin_hit\n",
    );
    for (i, r) in rows.iter().enumerate() {
        writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{:.6},{:.3},{},{},{}",
            i,
            r.fg_iou,
            r.bg_iou,
            r.mean_iou,
            r.box_iou,
            r.azimuth_error,
            r.detected as u8,
            r.oriented as u8,
            r.azimuth_bin_hit as u8
        )
        .unwrap();
    }
    let s = summarize(rows);
    writeln!(
        out,
        "mean,{:.6},{:.6},{:.6},{:.6},{:.3},{:.4},{:.4},{:.4}",
        s.mean_fg_iou,
        s.mean_bg_iou,
        s.mean_iou,
        s.mean_box_iou,
        s.mean_azimuth_error,
        s.detection_accuracy,
        s.oriented_accuracy,
        s.azimuth_accuracy
    )
    .unwrap();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Camera;
    use crate::synth;
    use crate::wireframe::gen_box;

    fn mask_from_rows(rows: &[&str]) -> ProjectionMask {
        let mut m = ProjectionMask::empty(rows[0].len() as u32, rows.len() as u32);
        for (y, row) in rows.iter().enumerate() {
            for (x, c) in row.bytes().enumerate() {
                if c == b'#' {
                    m.set(x as i64, y as i64);
                }
            }
        }
        m
    }

    #[test]
    fn seg_scores_on_hand_counted_masks() {
        let pred = mask_from_rows(&["##..", "##..", "...."]);
        let gt = mask_from_rows(&["##..", ".##.", "...."]);
        // fg: inter 3, union 5; bg: inter 7, union 9.
        let s = seg_scores(&pred, &gt);
        assert!((s.fg_iou - 3.0 / 5.0).abs() < 1e-12);
        assert!((s.bg_iou - 7.0 / 9.0).abs() < 1e-12);
        assert!((s.mean_iou - 0.5 * (3.0 / 5.0 + 7.0 / 9.0)).abs() < 1e-12);
    }

    #[test]
    fn identical_masks_score_one_everywhere() {
        let m = mask_from_rows(&["#.", ".#"]);
        let s = seg_scores(&m, &m);
        assert_eq!((s.fg_iou, s.bg_iou, s.mean_iou), (1.0, 1.0, 1.0));
    }

    #[test]
    fn azimuth_error_wraps_at_the_seam() {
        assert!((azimuth_error_deg(170.0, -170.0) - 20.0).abs() < 1e-12);
        assert!((azimuth_error_deg(-170.0, 170.0) - 20.0).abs() < 1e-12);
        assert_eq!(azimuth_error_deg(-180.0, 180.0), 0.0);
        assert_eq!(azimuth_error_deg(0.0, 180.0), 180.0);
        assert_eq!(azimuth_error_deg(45.0, 45.0), 0.0);
    }

    #[test]
    fn azimuth_bins_cover_eight_directions() {
        // Bin k is centered on 45k degrees and spans +/- 22.5 around it.
        for k in 0..8 {
            let center = 45.0 * k as f64;
            assert_eq!(azimuth_bin(center), k);
            assert_eq!(azimuth_bin(center - 22.4), k);
            assert_eq!(azimuth_bin(center + 22.4), k);
        }
        assert_eq!(azimuth_bin(-22.4), 0);
        assert_eq!(azimuth_bin(337.7), 0);
        assert_eq!(azimuth_bin(-90.0), 6);
        assert_eq!(azimuth_bin(360.0), 0);
    }

    #[test]
    fn perfect_prediction_is_an_oriented_detection() {
        let model = gen_box(4.0, 1.8, 1.5, 4);
        let scene = synth::generate(&model, None, &synth::NoiseParams::noiseless(), 5).unwrap();
        let cam = Camera::new(synth::SCENE_WIDTH, synth::SCENE_HEIGHT);
        let m = evaluate_scene(
            &model,
            &cam,
            &scene.mask,
            &scene.mask,
            &scene.pose,
            &scene.pose,
        );
        assert_eq!((m.fg_iou, m.bg_iou, m.mean_iou), (1.0, 1.0, 1.0));
        assert!(m.box_iou > 0.95, "box I/U {}", m.box_iou);
        assert!(m.detected && m.oriented && m.azimuth_bin_hit);
        assert_eq!(m.azimuth_error, 0.0);
    }

    #[test]
    fn quarter_turn_breaks_orientation_but_not_detection() {
        let model = gen_box(4.0, 1.8, 1.5, 4);
        let scene = synth::generate(&model, None, &synth::NoiseParams::noiseless(), 5).unwrap();
        let cam = Camera::new(synth::SCENE_WIDTH, synth::SCENE_HEIGHT);
        let mut turned = scene.pose;
        turned.azimuth += 90.0;
        let turned_mask = crate::hull::projection_hull(&model, &turned, &cam);
        let m = evaluate_scene(&model, &cam, &turned_mask, &scene.mask, &turned, &scene.pose);
        assert!((m.azimuth_error - 90.0).abs() < 1e-12);
        assert!(!m.oriented);
        assert!(!m.azimuth_bin_hit);
        // Same position and scale, so the box still overlaps well.
        assert!(m.box_iou > 0.3, "box I/U {}", m.box_iou);
    }

    #[test]
    fn summary_and_csv_agree_with_hand_averages() {
        let a = SceneMetrics {
            fg_iou: 0.8,
            bg_iou: 0.9,
            mean_iou: 0.85,
            box_iou: 0.7,
            azimuth_error: 10.0,
            detected: true,
            oriented: true,
            azimuth_bin_hit: true,
        };
        let b = SceneMetrics {
            fg_iou: 0.4,
            bg_iou: 0.5,
            mean_iou: 0.45,
            box_iou: 0.3,
            azimuth_error: 30.0,
            detected: false,
            oriented: false,
            azimuth_bin_hit: true,
        };
        let s = summarize(&[a, b]);
        assert_eq!(s.scenes, 2);
        assert!((s.mean_fg_iou - 0.6).abs() < 1e-12);
        assert!((s.detection_accuracy - 0.5).abs() < 1e-12);
        assert!((s.oriented_accuracy - 0.5).abs() < 1e-12);
        assert!((s.azimuth_accuracy - 1.0).abs() < 1e-12);
        assert!((s.mean_azimuth_error - 20.0).abs() < 1e-12);

        let csv = to_csv(&[a, b]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("scene,fg_iou"));
        assert!(lines[1].starts_with("0,0.800000"));
        assert!(lines[3].starts_with("mean,0.600000"));
        assert!(lines[3].ends_with("0.5000,0.5000,1.0000"));
    }
}

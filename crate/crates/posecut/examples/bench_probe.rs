//! Temporary diagnostic: per-call timings for the hot scoring paths.

use std::time::Instant;

use posecut::bounds::ScoreContext;
use posecut::color_model::ColorModel;
use posecut::energy::{EnergyWeights, SceneData, SceneOptions};
use posecut::geometry::{Camera, Pose, PoseCell};
use posecut::hull::{self, ProjectionMask};
use posecut::wireframe::gen_default_sedan;

fn main() {
    let scene_png = std::env::args().nth(1).expect("scene png");
    let mask_png = std::env::args().nth(2).expect("mask png");
    let img = image::open(&scene_png).unwrap().to_rgb8();
    let gt = ProjectionMask::load_png(std::path::Path::new(&mask_png)).unwrap();
    let cam = Camera::new(img.width(), img.height());
    let model = gen_default_sedan();
    let colors = ColorModel::train_from_mask(&img, &gt, 7).unwrap();
    let scene = SceneData::build(&img, model.clone(), &colors, SceneOptions::default()).unwrap();
    let x = scene.graph.majority_labeling(&gt);
    let weights =
        EnergyWeights::parse("w1 1.0\nw2 0.5\nw3 1.0\nw4 0.05\nw5 0.01\nmodelKind volume")
            .unwrap();
    let ctx = ScoreContext::given_seg(&scene, &weights, &x);

    let pose = Pose {
        azimuth: 173.99,
        elevation: 1.33,
        tilt: 0.0,
        depth: 8.22,
        img_u: 3.63,
        img_v: -2.54,
    };
    let cell = PoseCell::from_ranges(
        (170.0, 180.0),
        (1.0, 1.5),
        (0.0, 0.0),
        (8.0, 9.0),
        (3.0, 4.0),
        (-3.0, -2.0),
    );

    let n = 2000;

    let t = Instant::now();
    let mut acc = 0.0;
    for _ in 0..n {
        acc += ctx.bound(&cell).total;
    }
    println!(
        "bound:            {:8.1} us/call   (acc {acc:.1})",
        t.elapsed().as_secs_f64() * 1e6 / n as f64
    );

    let t = Instant::now();
    let mut acc = 0.0;
    for _ in 0..n {
        acc += ctx.exact_score(&pose);
    }
    println!(
        "exact_score:      {:8.1} us/call   (acc {acc:.1})",
        t.elapsed().as_secs_f64() * 1e6 / n as f64
    );

    let t = Instant::now();
    let mut acc = 0.0;
    for _ in 0..n {
        acc += scene.f_seg(&x, &pose);
    }
    println!(
        "  f_seg:          {:8.1} us/call   (acc {acc:.1})",
        t.elapsed().as_secs_f64() * 1e6 / n as f64
    );

    let t = Instant::now();
    let mut acc = 0usize;
    for _ in 0..n {
        acc += scene.hull_mask(&pose).area();
    }
    println!(
        "  hull_mask:      {:8.1} us/call   (acc {acc})",
        t.elapsed().as_secs_f64() * 1e6 / n as f64
    );

    let t = Instant::now();
    let mut acc = 0usize;
    for _ in 0..n {
        acc += hull::projected_visible_points(&model, &pose, &cam).len();
    }
    println!(
        "    proj pts:     {:8.1} us/call   (acc {acc})",
        t.elapsed().as_secs_f64() * 1e6 / n as f64
    );

    let pi = scene.hull_mask(&pose);
    let t = Instant::now();
    let mut acc = 0.0;
    for _ in 0..n {
        let (a, b) = scene.volume_overlaps_with_mask(&x, &pi);
        acc += a + b;
    }
    println!(
        "  overlaps(mask): {:8.1} us/call   (acc {acc:.1})",
        t.elapsed().as_secs_f64() * 1e6 / n as f64
    );
}

//! Prints every energy term for one or more poses against a scene, useful
//! for understanding why the pose search prefers one candidate over another.
//!
//! Usage: score_breakdown <image.png> <mask.png> <weights.txt> <pose.txt>...

use std::path::Path;

use posecut::bounds::ScoreContext;
use posecut::color_model::ColorModel;
use posecut::energy::{EnergyWeights, SceneData, SceneOptions};
use posecut::geometry::Pose;
use posecut::wireframe::gen_default_sedan;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.len() < 4 {
        eprintln!("usage: score_breakdown <image.png> <mask.png> <weights.txt> <pose.txt>...");
        std::process::exit(2);
    }
    let img = image::open(&args[0]).expect("image").to_rgb8();
    let mask = posecut::hull::ProjectionMask::load_png(Path::new(&args[1])).expect("mask");
    let weights = EnergyWeights::load(Path::new(&args[2])).expect("weights");

    let colors = ColorModel::train_from_mask(&img, &mask, 0).expect("color model");
    let scene = SceneData::build(&img, gen_default_sedan(), &colors, SceneOptions::default())
        .expect("scene");
    let seg = scene.graph.majority_labeling(&mask);
    let ctx = ScoreContext::given_seg(&scene, &weights, &seg);
    let w = weights.as_array();

    println!("{:>10} {:>10} {:>10} {:>10} {:>8} {:>8}  pose", "score", "w3*f_seg", "w4*int", "w5*bgint", "hull_px", "visible");
    for pose_path in &args[3..] {
        let pose = Pose::load(Path::new(pose_path)).expect("pose");
        let f_seg = scene.f_seg(&seg, &pose);
        let (inter, bg_inter) = scene.volume_overlaps(&seg, &pose);
        let hull = scene.hull_mask(&pose);
        let frame = posecut::geometry::Frame::new(&pose, &scene.cam);
        let visible = scene
            .model
            .primitives
            .iter()
            .filter(|p| posecut::wireframe::visibility(p, &frame))
            .count();
        println!(
            "{:>10.3} {:>10.3} {:>10.3} {:>10.3} {:>8} {:>8}  {}",
            ctx.exact_score(&pose),
            w[2] * f_seg,
            w[3] * inter,
            w[4] * bg_inter,
            hull.area(),
            visible,
            pose.to_line()
        );
    }
}

//! Temporary diagnostic: per-primitive feature values at a pose.

use std::path::Path;

use posecut::color_model::ColorModel;
use posecut::energy::{SceneData, SceneOptions};
use posecut::geometry::{Frame, Pose};
use posecut::wireframe::{gen_default_box, gen_default_sedan, project_to_bin, visibility};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let img = image::open(&args[0]).expect("image").to_rgb8();
    let mask = posecut::hull::ProjectionMask::load_png(Path::new(&args[1])).expect("mask");
    let pose = Pose::load(Path::new(&args[2])).expect("pose");

    let model = if args.get(3).map(|s| s.as_str()) == Some("box") {
        gen_default_box()
    } else {
        gen_default_sedan()
    };
    let colors = ColorModel::train_from_mask(&img, &mask, 0).expect("colors");
    let scene = SceneData::build(&img, model, &colors, SceneOptions::default()).expect("scene");
    let seg = scene.graph.majority_labeling(&mask);
    let frame = Frame::new(&pose, &scene.cam);

    let mut visible = 0;
    let mut in_fg = 0;
    let mut sum = 0.0;
    let mut sum_fg = 0.0;
    let mut hist = [0usize; 10];
    for pr in &scene.model.primitives {
        if !visibility(pr, &frame) {
            continue;
        }
        let Some(bin) = project_to_bin(pr, &frame, &scene.layout) else { continue };
        let Some([px, py]) = frame.project(pr.p) else { continue };
        if px < 0.0 || py < 0.0 || px >= scene.cam.width as f64 || py >= scene.cam.height as f64 {
            continue;
        }
        visible += 1;
        let v = scene.grid.get(bin.u, bin.v, bin.w);
        sum += v;
        hist[((v * 9.999) as usize).min(9)] += 1;
        if seg[scene.graph.label_at(px as u32, py as u32)] {
            in_fg += 1;
            sum_fg += v;
        }
    }
    println!("visible {visible}, in fg superpixel {in_fg}");
    println!("sum(all) {sum:.3}  sum(fg only, = f_seg) {sum_fg:.3}");
    println!("value histogram (0.0-1.0 in tenths): {hist:?}");
}

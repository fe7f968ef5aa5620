//! Command-line driver: segmentation, pose search, joint inference, weight
//! learning, evaluation, and synthetic-data tooling.
//!
//! Every command writes all of its outputs (plus the resolved configuration
//! as `config.json` and a `manifest.txt` listing produced files) under a
//! single run directory. Exit codes: 0 ok, 2 usage, 3 data error, 4 the
//! joint solver could not improve on its starting state.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use image::RgbImage;
use serde::Serialize;

use posecut::am::{self, AmMode, AmOptions, AmStatus};
use posecut::bnb::{self, BnbError, Visit};
use posecut::bounds::ScoreContext;
use posecut::color_model::{ColorModel, HintBox};
use posecut::energy::{EnergyWeights, SceneData, SceneOptions, Segmentation};
use posecut::geometry::{Camera, Pose, PoseCell};
use posecut::hull::{projected_visible_points, ProjectionMask};
use posecut::learn::{self, BcfwOptions, LearnMode, TrainingExample};
use posecut::metrics;
use posecut::mincut::min_cut;
use posecut::synth::{self, NoiseParams};
use posecut::wireframe::{gen_box, WireframeModel};

#[derive(Parser, Serialize)]
#[command(name = "posecut", version, about = "Joint object segmentation and 6-DOF pose estimation driven by a 3D wireframe model")]
struct Cli {
    /// Worker threads (default: all cores). Use 1 for bit-reproducible runs.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Serialize)]
enum Command {
    /// Segment an image at a known pose (exact min-cut).
    Segment(SegmentArgs),
    /// Estimate pose by branch-and-bound, with or without a segmentation.
    Pose(PoseArgs),
    /// Jointly estimate segmentation and pose by alternating minimization.
    Joint(JointArgs),
    /// Learn energy weights from a dataset manifest (max-margin, BCFW).
    Learn(LearnArgs),
    /// Score predicted masks and poses against ground truth.
    Eval(EvalArgs),
    /// Synthetic scene tools.
    #[command(subcommand)]
    Synth(SynthCmd),
    /// Wireframe model tools.
    #[command(subcommand)]
    Model(ModelCmd),
}

#[derive(Subcommand, Serialize)]
enum SynthCmd {
    /// Generate a suite of rendered scenes with ground truth and a manifest.
    Gen(SynthGenArgs),
}

#[derive(Subcommand, Serialize)]
enum ModelCmd {
    /// Emit the procedural car wireframe model (box body plus cabin) as JSON.
    GenBox(GenBoxArgs),
}

#[derive(Args, Serialize)]
struct SegmentArgs {
    #[arg(long)]
    image: PathBuf,
    /// Pose file: one line `azimuth elevation tilt depth img_u img_v`.
    #[arg(long)]
    pose: PathBuf,
    #[arg(long)]
    weights: PathBuf,
    /// Wireframe model JSON (default: built-in box car).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Ground-truth mask PNG: trains the color model and scores I/U.
    #[arg(long)]
    gt_mask: Option<PathBuf>,
    /// Color-model training box `x y w h` in pixels, used without --gt-mask.
    #[arg(long)]
    hint: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct PoseArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    weights: PathBuf,
    /// Fixed segmentation mask PNG; omit to search in detection mode.
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Detector-style box `x y w h` restricting depth and image position.
    #[arg(long)]
    hint: Option<String>,
    /// Search ranges, 12 floats `a0 a1 b0 b1 c0 c1 d0 d1 u0 u1 v0 v1`.
    #[arg(long, allow_hyphen_values = true)]
    ranges: Option<String>,
    /// Finest cell widths, 6 floats `a b c d u v`.
    #[arg(long, allow_hyphen_values = true)]
    resolutions: Option<String>,
    /// Run a second search at these resolutions (6 floats) in a window
    /// around the first winner.
    #[arg(long, allow_hyphen_values = true)]
    refine: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct JointArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    weights: PathBuf,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Ground-truth mask PNG: trains the color model and scores I/U.
    #[arg(long)]
    gt_mask: Option<PathBuf>,
    /// Color-model training box `x y w h`; also restricts the pose search.
    #[arg(long)]
    hint: Option<String>,
    #[arg(long, default_value_t = 10)]
    max_iters: usize,
    /// Multiplicative decrease test `E_new < tau * E_old` (positive energies).
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    ranges: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    resolutions: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct LearnArgs {
    /// Dataset manifest: lines of `image mask pose` paths.
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 0.01)]
    lambda: f64,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    /// Constraint family: seg, pose, or joint.
    #[arg(long, default_value = "seg")]
    mode: String,
    /// Energy family: volume (w1..w5) or shape (w1..w3).
    #[arg(long, default_value = "volume")]
    kind: String,
    #[arg(long, allow_hyphen_values = true)]
    ranges: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    resolutions: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct EvalArgs {
    /// Ground-truth manifest: lines of `image mask pose` paths.
    #[arg(long)]
    manifest: PathBuf,
    /// Directory holding `<stem>_mask.png` and `<stem>_pose.txt` predictions.
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct SynthGenArgs {
    #[arg(long, default_value_t = 50)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Render clean scenes (no background noise, jitter, or decoys).
    #[arg(long, default_value_t = false)]
    noiseless: bool,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct GenBoxArgs {
    /// Emit a bare cuboid (no cabin); azimuth is then 180-degree ambiguous.
    #[arg(long, default_value_t = false)]
    plain: bool,
    /// Cuboid dimensions, used with --plain.
    #[arg(long, default_value_t = 4.0)]
    length: f64,
    #[arg(long, default_value_t = 1.8)]
    width: f64,
    #[arg(long, default_value_t = 1.5)]
    height: f64,
    /// Sample points per model edge.
    #[arg(long, default_value_t = 5)]
    per_edge: usize,
    #[arg(long)]
    out: PathBuf,
}

enum AppError {
    Usage(String),
    Data(String),
    NoImprovement(String),
}

type AppResult<T> = Result<T, AppError>;

fn usage(msg: impl Into<String>) -> AppError {
    AppError::Usage(msg.into())
}

fn data_err(msg: impl std::fmt::Display) -> AppError {
    AppError::Data(msg.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .ok();
    }
    let result = match &cli.command {
        Command::Segment(a) => cmd_segment(&cli, a),
        Command::Pose(a) => cmd_pose(&cli, a),
        Command::Joint(a) => cmd_joint(&cli, a),
        Command::Learn(a) => cmd_learn(&cli, a),
        Command::Eval(a) => cmd_eval(&cli, a),
        Command::Synth(SynthCmd::Gen(a)) => cmd_synth_gen(&cli, a),
        Command::Model(ModelCmd::GenBox(a)) => cmd_gen_box(&cli, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(AppError::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
        Err(AppError::NoImprovement(m)) => {
            eprintln!("{m}");
            ExitCode::from(4)
        }
    }
}

/// Output directory with a config snapshot and a file manifest.
struct RunDir {
    dir: PathBuf,
    files: Vec<String>,
}

impl RunDir {
    fn create(dir: &Path, cli: &Cli) -> AppResult<Self> {
        std::fs::create_dir_all(dir)
            .map_err(|e| usage(format!("cannot create output dir {}: {e}", dir.display())))?;
        let config = serde_json::to_string_pretty(cli).expect("config serializes");
        std::fs::write(dir.join("config.json"), config).map_err(data_err)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: vec!["config.json".into()],
        })
    }

    /// Registers `name` in the manifest and returns its full path.
    fn file(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    fn finish(mut self) -> AppResult<()> {
        self.files.push("manifest.txt".into());
        let listing: String = self.files.iter().map(|f| format!("{f}\n")).collect();
        std::fs::write(self.dir.join("manifest.txt"), listing).map_err(data_err)
    }
}

fn require_file(path: &Path, what: &str) -> AppResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("{what} not found: {}", path.display())))
    }
}

fn load_image(path: &Path) -> AppResult<RgbImage> {
    require_file(path, "image")?;
    Ok(image::open(path)
        .map_err(|e| data_err(format!("cannot decode {}: {e}", path.display())))?
        .to_rgb8())
}

fn load_mask(path: &Path, what: &str) -> AppResult<ProjectionMask> {
    require_file(path, what)?;
    ProjectionMask::load_png(path)
        .map_err(|e| data_err(format!("cannot decode {}: {e}", path.display())))
}

fn load_pose(path: &Path) -> AppResult<Pose> {
    require_file(path, "pose file")?;
    Pose::load(path).map_err(|e| data_err(format!("{}: {e}", path.display())))
}

fn load_weights(path: &Path) -> AppResult<EnergyWeights> {
    require_file(path, "weights file")?;
    EnergyWeights::load(path).map_err(|e| data_err(format!("{}: {e}", path.display())))
}

fn load_model(path: &Option<PathBuf>) -> AppResult<WireframeModel> {
    match path {
        None => Ok(posecut::wireframe::gen_default_sedan()),
        Some(p) => {
            require_file(p, "model file")?;
            WireframeModel::load(p).map_err(|e| data_err(format!("{}: {e}", p.display())))
        }
    }
}

fn parse_hint(s: &Option<String>) -> AppResult<Option<HintBox>> {
    match s {
        None => Ok(None),
        Some(t) => HintBox::parse(t)
            .map(Some)
            .ok_or_else(|| usage(format!("bad --hint {t:?}: expected `x y w h` with w,h > 0"))),
    }
}

fn parse_floats(s: &str, n: usize, flag: &str) -> AppResult<Vec<f64>> {
    let v: Option<Vec<f64>> = s.split_whitespace().map(|t| t.parse().ok()).collect();
    match v {
        Some(v) if v.len() == n => Ok(v),
        _ => Err(usage(format!("bad {flag} {s:?}: expected {n} floats"))),
    }
}

fn parse_ranges(s: &Option<String>) -> AppResult<PoseCell> {
    match s {
        None => Ok(bnb::default_ranges()),
        Some(t) => {
            let v = parse_floats(t, 12, "--ranges")?;
            for i in 0..6 {
                if v[2 * i] > v[2 * i + 1] {
                    return Err(usage(format!("--ranges axis {i}: lo > hi")));
                }
            }
            Ok(PoseCell::from_ranges(
                (v[0], v[1]),
                (v[2], v[3]),
                (v[4], v[5]),
                (v[6], v[7]),
                (v[8], v[9]),
                (v[10], v[11]),
            ))
        }
    }
}

fn parse_resolutions(s: &Option<String>) -> AppResult<[f64; 6]> {
    match s {
        None => Ok(bnb::default_resolutions()),
        Some(t) => {
            let v = parse_floats(t, 6, "--resolutions")?;
            Ok([v[0], v[1], v[2], v[3], v[4], v[5]])
        }
    }
}

/// Trains the color model from the ground-truth mask when available, else
/// from the hint box, else from a centered box covering a quarter of the
/// image (a weak but serviceable default for detection-style runs).
fn train_colors(
    img: &RgbImage,
    gt_mask: Option<&ProjectionMask>,
    hint: Option<&HintBox>,
    seed: u64,
) -> AppResult<ColorModel> {
    let res = match (gt_mask, hint) {
        (Some(m), _) => ColorModel::train_from_mask(img, m, seed),
        (None, Some(h)) => ColorModel::train_from_hint(img, h, seed),
        (None, None) => {
            let (w, h) = (img.width() as f64, img.height() as f64);
            let center = HintBox {
                x: w * 0.25,
                y: h * 0.25,
                w: w * 0.5,
                h: h * 0.5,
            };
            ColorModel::train_from_hint(img, &center, seed)
        }
    };
    res.map_err(data_err)
}

fn build_scene(
    img: &RgbImage,
    model: WireframeModel,
    colors: &ColorModel,
    seed: u64,
) -> AppResult<SceneData> {
    let opts = SceneOptions {
        seed,
        ..SceneOptions::default()
    };
    SceneData::build(img, model, colors, opts).map_err(data_err)
}

fn check_dims(img: &RgbImage, mask: &ProjectionMask, what: &str) -> AppResult<()> {
    if (img.width(), img.height()) == (mask.width, mask.height) {
        Ok(())
    } else {
        Err(data_err(format!(
            "{what} is {}x{} but the image is {}x{}",
            mask.width,
            mask.height,
            img.width(),
            img.height()
        )))
    }
}

/// Image with foreground tinted green, mask boundary in yellow, and the
/// projected wireframe (if a pose is given) dotted in red.
fn overlay(
    img: &RgbImage,
    mask: &ProjectionMask,
    wire: Option<(&WireframeModel, &Pose, &Camera)>,
) -> RgbImage {
    let mut out = img.clone();
    for y in 0..img.height() as i64 {
        for x in 0..img.width() as i64 {
            if !mask.get(x, y) {
                continue;
            }
            let interior = mask.get(x - 1, y) && mask.get(x + 1, y) && mask.get(x, y - 1) && mask.get(x, y + 1);
            let p = &mut out.get_pixel_mut(x as u32, y as u32).0;
            if interior {
                p[0] /= 2;
                p[1] = (p[1] as u16 + 255).min(510) as u8 / 2 + 64;
                p[2] /= 2;
            } else {
                *p = [255, 220, 40];
            }
        }
    }
    if let Some((model, pose, cam)) = wire {
        for pt in projected_visible_points(model, pose, cam) {
            let (x, y) = (pt[0].round() as i64, pt[1].round() as i64);
            if x >= 0 && y >= 0 && (x as u32) < out.width() && (y as u32) < out.height() {
                out.get_pixel_mut(x as u32, y as u32).0 = [255, 32, 32];
            }
        }
    }
    out
}

fn save_png(img: &RgbImage, path: &Path) -> AppResult<()> {
    img.save(path)
        .map_err(|e| data_err(format!("cannot write {}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> AppResult<()> {
    std::fs::write(path, text).map_err(|e| data_err(format!("cannot write {}: {e}", path.display())))
}

fn cmd_segment(cli: &Cli, a: &SegmentArgs) -> AppResult<()> {
    let img = load_image(&a.image)?;
    let pose = load_pose(&a.pose)?;
    let weights = load_weights(&a.weights)?;
    let model = load_model(&a.model)?;
    let hint = parse_hint(&a.hint)?;
    let gt = match &a.gt_mask {
        Some(p) => {
            let m = load_mask(p, "ground-truth mask")?;
            check_dims(&img, &m, "ground-truth mask")?;
            Some(m)
        }
        None => None,
    };
    let mut run = RunDir::create(&a.out, cli)?;

    let colors = train_colors(&img, gt.as_ref(), hint.as_ref(), a.seed)?;
    let scene = build_scene(&img, model, &colors, a.seed)?;
    let cut = min_cut(&scene.cut_costs(Some(&pose), &weights)).map_err(data_err)?;
    let mask = scene.graph.labeling_mask(&cut.labels);

    mask.save_png(&run.file("mask.png")).map_err(data_err)?;
    save_png(
        &overlay(&img, &mask, Some((&scene.model, &pose, &scene.cam))),
        &run.file("overlay.png"),
    )?;

    let mut report = format!("energy {}\nforeground_px {}\n", cut.energy, mask.area());
    if let Some(gt) = &gt {
        let s = metrics::seg_scores(&mask, gt);
        writeln!(report, "fg_iou {:.6}\nbg_iou {:.6}\nmean_iou {:.6}", s.fg_iou, s.bg_iou, s.mean_iou).unwrap();
        println!("fg I/U {:.4}  bg I/U {:.4}  mean {:.4}", s.fg_iou, s.bg_iou, s.mean_iou);
    }
    write_text(&run.file("report.txt"), &report)?;
    println!("energy {:.6} ({} fg px) -> {}", cut.energy, mask.area(), a.out.display());
    run.finish()
}

fn map_bnb_err(e: BnbError) -> AppError {
    match e {
        BnbError::HintInfeasible => data_err(e),
        BnbError::ZeroResolution(_) => usage(e.to_string()),
    }
}

fn cmd_pose(cli: &Cli, a: &PoseArgs) -> AppResult<()> {
    let img = load_image(&a.image)?;
    let weights = load_weights(&a.weights)?;
    let model = load_model(&a.model)?;
    let hint = parse_hint(&a.hint)?;
    let ranges = parse_ranges(&a.ranges)?;
    let resolutions = parse_resolutions(&a.resolutions)?;
    let mask = match &a.mask {
        Some(p) => {
            let m = load_mask(p, "segmentation mask")?;
            check_dims(&img, &m, "segmentation mask")?;
            Some(m)
        }
        None => None,
    };
    let mut run = RunDir::create(&a.out, cli)?;

    let colors = train_colors(&img, mask.as_ref(), hint.as_ref(), a.seed)?;
    let scene = build_scene(&img, model, &colors, a.seed)?;
    let seg: Option<Segmentation> = mask.as_ref().map(|m| scene.graph.majority_labeling(m));
    let ctx = match &seg {
        Some(x) => ScoreContext::given_seg(&scene, &weights, x),
        None => ScoreContext::detection(&scene, &weights),
    };

    let root_report = ctx.bound(&ranges);
    let mut log = String::new();
    writeln!(log, "root cell bound report").unwrap();
    writeln!(log, "  shape        {:.6}", root_report.shape).unwrap();
    writeln!(log, "  intersection {:.6}", root_report.intersection).unwrap();
    writeln!(log, "  union_term   {:.6}", root_report.union_term).unwrap();
    writeln!(log, "  total        {:.6}", root_report.total).unwrap();
    writeln!(log, "  s1..s5       {:?}", root_report.s).unwrap();
    writeln!(log, "pop  bound  center(a b c d u v)").unwrap();
    const LOG_CAP: usize = 200_000;
    let mut pop_no = 0usize;
    let res = match &a.refine {
        Some(r) => {
            let fine = parse_floats(r, 6, "--refine")?;
            writeln!(log, "(per-pop log disabled for refined searches)").unwrap();
            bnb::coarse_to_fine(
                &ctx,
                ranges,
                resolutions,
                [fine[0], fine[1], fine[2], fine[3], fine[4], fine[5]],
                hint.as_ref(),
            )
            .map_err(map_bnb_err)?
        }
        None => bnb::search(&ctx, ranges, resolutions, hint.as_ref(), |cell, bound| {
            pop_no += 1;
            if pop_no <= LOG_CAP {
                writeln!(log, "{} {:.6} {}", pop_no, bound, cell.center().to_line()).unwrap();
            }
            Visit::Continue
        })
        .map_err(map_bnb_err)?,
    };
    if pop_no > LOG_CAP {
        writeln!(log, "... {} more pops not logged", pop_no - LOG_CAP).unwrap();
    }
    writeln!(
        log,
        "result: score {:.6} after {} pops, {} exact evaluations",
        res.best_score, res.pops, res.exact_evals
    )
    .unwrap();

    res.best_pose.save(&run.file("pose.txt")).map_err(data_err)?;
    res.best_cell.save(&run.file("cell.txt")).map_err(data_err)?;
    write_text(&run.file("search.log"), &log)?;
    let pi = scene.hull_mask(&res.best_pose);
    save_png(
        &overlay(&img, &pi, Some((&scene.model, &res.best_pose, &scene.cam))),
        &run.file("overlay.png"),
    )?;
    println!(
        "pose {}  score {:.6}  ({} pops) -> {}",
        res.best_pose.to_line(),
        res.best_score,
        res.pops,
        a.out.display()
    );
    run.finish()
}

fn cmd_joint(cli: &Cli, a: &JointArgs) -> AppResult<()> {
    let img = load_image(&a.image)?;
    let weights = load_weights(&a.weights)?;
    let model = load_model(&a.model)?;
    let hint = parse_hint(&a.hint)?;
    let gt = match &a.gt_mask {
        Some(p) => {
            let m = load_mask(p, "ground-truth mask")?;
            check_dims(&img, &m, "ground-truth mask")?;
            Some(m)
        }
        None => None,
    };
    let mut run = RunDir::create(&a.out, cli)?;

    let colors = train_colors(&img, gt.as_ref(), hint.as_ref(), a.seed)?;
    let scene = build_scene(&img, model, &colors, a.seed)?;
    let opts = AmOptions {
        mode: AmMode::Full,
        max_iters: a.max_iters,
        tau: a.tau,
        ranges: parse_ranges(&a.ranges)?,
        resolutions: parse_resolutions(&a.resolutions)?,
        hint,
        ..AmOptions::default()
    };
    let state = am::am_run(&scene, &weights, &opts).map_err(data_err)?;

    let mut trace = String::from("iteration,energy\n");
    for (i, (e, it)) in state.trace.iter().zip(&state.history).enumerate() {
        writeln!(trace, "{i},{e}").unwrap();
        let mask = scene.graph.labeling_mask(&it.seg);
        mask.save_png(&run.file(&format!("iter_{i:02}_mask.png"))).map_err(data_err)?;
        it.pose.save(&run.file(&format!("iter_{i:02}_pose.txt"))).map_err(data_err)?;
        save_png(
            &overlay(&img, &mask, Some((&scene.model, &it.pose, &scene.cam))),
            &run.file(&format!("iter_{i:02}_overlay.png")),
        )?;
    }
    write_text(&run.file("trace.csv"), &trace)?;

    let final_mask = scene.graph.labeling_mask(&state.seg);
    final_mask.save_png(&run.file("mask.png")).map_err(data_err)?;
    state.pose.save(&run.file("pose.txt")).map_err(data_err)?;
    save_png(
        &overlay(&img, &final_mask, Some((&scene.model, &state.pose, &scene.cam))),
        &run.file("overlay.png"),
    )?;

    if let Some(gt) = &gt {
        let s = metrics::seg_scores(&final_mask, gt);
        println!("fg I/U {:.4}  bg I/U {:.4}  mean {:.4}", s.fg_iou, s.bg_iou, s.mean_iou);
    }
    println!(
        "{:?} after {} iterations, energy {:.6} -> {}",
        state.status,
        state.iteration,
        state.trace.last().unwrap(),
        a.out.display()
    );
    run.finish()?;
    if state.status == AmStatus::NoImprovement {
        return Err(AppError::NoImprovement(
            "alternation could not improve on the initial state".into(),
        ));
    }
    Ok(())
}

fn load_examples(manifest: &Path, model: &WireframeModel, seed: u64) -> AppResult<Vec<TrainingExample>> {
    require_file(manifest, "manifest")?;
    let entries = synth::read_manifest(manifest).map_err(data_err)?;
    let mut out = Vec::with_capacity(entries.len());
    for e in &entries {
        let img = load_image(&e.image)?;
        let mask = load_mask(&e.mask, "mask")?;
        check_dims(&img, &mask, "mask")?;
        let pose = load_pose(&e.pose)?;
        let colors = ColorModel::train_from_mask(&img, &mask, seed).map_err(data_err)?;
        let scene = build_scene(&img, model.clone(), &colors, seed)?;
        let seg_gt = scene.graph.majority_labeling(&mask);
        out.push(TrainingExample { scene, seg_gt, pose_gt: pose });
    }
    Ok(out)
}

fn cmd_learn(cli: &Cli, a: &LearnArgs) -> AppResult<()> {
    let mode = match a.mode.as_str() {
        "seg" => LearnMode::Seg,
        "pose" => LearnMode::Pose,
        "joint" => LearnMode::Joint,
        m => return Err(usage(format!("bad --mode {m:?}: expected seg, pose, or joint"))),
    };
    let kind = match a.kind.as_str() {
        "volume" => posecut::energy::ModelKind::Volume,
        "shape" => posecut::energy::ModelKind::Shape,
        k => return Err(usage(format!("bad --kind {k:?}: expected volume or shape"))),
    };
    if a.lambda <= 0.0 {
        return Err(usage("--lambda must be positive"));
    }
    let model = load_model(&a.model)?;
    let opts = BcfwOptions {
        mode,
        kind,
        lambda: a.lambda,
        epochs: a.epochs,
        seed: a.seed,
        ranges: parse_ranges(&a.ranges)?,
        resolutions: parse_resolutions(&a.resolutions)?,
        ..BcfwOptions::default()
    };
    let mut run = RunDir::create(&a.out, cli)?;

    let examples = load_examples(&a.manifest, &model, a.seed)?;
    let state = learn::bcfw_train(&examples, &opts).map_err(data_err)?;

    state.weights.save(&run.file("weights.txt")).map_err(data_err)?;
    let mut csv = String::from("epoch,gap,violations,max_slack\n");
    for r in &state.epochs {
        writeln!(csv, "{},{},{},{}", r.epoch, r.gap, r.violations, r.max_slack).unwrap();
    }
    write_text(&run.file("training.csv"), &csv)?;
    let slacks: String = state.slacks.iter().map(|s| format!("{s}\n")).collect();
    write_text(&run.file("slacks.txt"), &slacks)?;

    let max_slack = state.slacks.iter().cloned().fold(0.0f64, f64::max);
    println!(
        "trained on {} examples: gap {:.3e}, max slack {:.3e} -> {}",
        examples.len(),
        state.gap,
        max_slack,
        a.out.display()
    );
    run.finish()
}

fn cmd_eval(cli: &Cli, a: &EvalArgs) -> AppResult<()> {
    require_file(&a.manifest, "manifest")?;
    let model = load_model(&a.model)?;
    if !a.pred.is_dir() {
        return Err(usage(format!("prediction dir not found: {}", a.pred.display())));
    }
    let entries = synth::read_manifest(&a.manifest).map_err(data_err)?;
    if entries.is_empty() {
        return Err(data_err("manifest lists no scenes"));
    }
    let mut run = RunDir::create(&a.out, cli)?;

    let mut rows = Vec::with_capacity(entries.len());
    for e in &entries {
        let stem = e
            .image
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| data_err(format!("bad image path in manifest: {}", e.image.display())))?;
        let gt_mask = load_mask(&e.mask, "ground-truth mask")?;
        let gt_pose = load_pose(&e.pose)?;
        let pred_mask_path = a.pred.join(format!("{stem}_mask.png"));
        let pred_pose_path = a.pred.join(format!("{stem}_pose.txt"));
        if !pred_mask_path.is_file() || !pred_pose_path.is_file() {
            return Err(data_err(format!(
                "missing prediction for {stem}: expected {} and {}",
                pred_mask_path.display(),
                pred_pose_path.display()
            )));
        }
        let pred_mask = load_mask(&pred_mask_path, "predicted mask")?;
        let pred_pose = load_pose(&pred_pose_path)?;
        if (pred_mask.width, pred_mask.height) != (gt_mask.width, gt_mask.height) {
            return Err(data_err(format!("prediction for {stem} has wrong dimensions")));
        }
        let cam = Camera::new(gt_mask.width, gt_mask.height);
        rows.push(metrics::evaluate_scene(&model, &cam, &pred_mask, &gt_mask, &pred_pose, &gt_pose));
    }

    write_text(&run.file("metrics.csv"), &metrics::to_csv(&rows))?;
    let s = metrics::summarize(&rows);
    println!(
        "{} scenes: fg I/U {:.4}, detection {:.2}%, oriented {:.2}%, azimuth bins {:.2}% -> {}",
        s.scenes,
        s.mean_fg_iou,
        100.0 * s.detection_accuracy,
        100.0 * s.oriented_accuracy,
        100.0 * s.azimuth_accuracy,
        a.out.display()
    );
    run.finish()
}

fn cmd_synth_gen(cli: &Cli, a: &SynthGenArgs) -> AppResult<()> {
    if a.n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    let model = load_model(&a.model)?;
    std::fs::create_dir_all(&a.out)
        .map_err(|e| usage(format!("cannot create output dir {}: {e}", a.out.display())))?;
    let config = serde_json::to_string_pretty(cli).expect("config serializes");
    std::fs::write(a.out.join("config.json"), config).map_err(data_err)?;

    let noise = if a.noiseless {
        NoiseParams::noiseless()
    } else {
        NoiseParams::noisy()
    };
    // The suite writes its own manifest (image/mask/pose triples per line),
    // which doubles as the run manifest.
    synth::write_suite(&a.out, &model, a.n, &noise, a.seed).map_err(data_err)?;
    println!("{} scenes -> {}", a.n, a.out.display());
    Ok(())
}

fn cmd_gen_box(cli: &Cli, a: &GenBoxArgs) -> AppResult<()> {
    if a.length <= 0.0 || a.width <= 0.0 || a.height <= 0.0 {
        return Err(usage("box dimensions must be positive"));
    }
    if a.per_edge < 2 {
        return Err(usage("--per-edge must be at least 2"));
    }
    let mut run = RunDir::create(&a.out, cli)?;
    let model = if a.plain {
        gen_box(a.length, a.width, a.height, a.per_edge)
    } else {
        posecut::wireframe::gen_sedan(a.per_edge)
    };
    model.save(&run.file("model.json")).map_err(data_err)?;
    println!("{} primitives -> {}", model.len(), a.out.display());
    run.finish()
}

//! Alternating minimization for joint segmentation and pose.
//!
//! Each iteration runs a pose search where every popped cell's center is
//! paired with the exact min-cut segmentation for that pose; the search stops
//! as soon as the paired energy passes the decrease test. The energy trace is
//! non-increasing by construction of the acceptance test.

use std::fmt;

use crate::bnb::{self, BnbError, Visit};
use crate::bounds::ScoreContext;
use crate::color_model::HintBox;
use crate::energy::{EnergyWeights, SceneData, Segmentation};
use crate::geometry::{Pose, PoseCell};
use crate::mincut::{min_cut, MinCutError};

#[derive(Debug)]
pub enum AmError {
    Bnb(BnbError),
    Cut(MinCutError),
}

impl fmt::Display for AmError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AmError::Bnb(e) => write!(f, "pose search failed: {e}"),
            AmError::Cut(e) => write!(f, "min-cut failed: {e}"),
        }
    }
}

impl std::error::Error for AmError {}

impl From<BnbError> for AmError {
    fn from(e: BnbError) -> Self {
        AmError::Bnb(e)
    }
}

impl From<MinCutError> for AmError {
    fn from(e: MinCutError) -> Self {
        AmError::Cut(e)
    }
}

/// Which part of the alternation to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmMode {
    /// Full alternation until convergence.
    Full,
    /// Pose refinement from the bottom-up segmentation, then stop.
    PoseOnly,
    /// One segmentation update at the detected pose, then stop.
    SegOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmStatus {
    /// Consecutive segmentations agreed (pixel I/U above threshold).
    Converged,
    MaxIters,
    /// The pose search exhausted its queue and even the best paired
    /// candidate would increase the energy.
    NoImprovement,
    /// A `PoseOnly` or `SegOnly` run finished its half-iteration.
    HalfIteration,
}

#[derive(Debug, Clone)]
pub struct AmOptions {
    pub mode: AmMode,
    pub max_iters: usize,
    /// Relative decrease required to accept a candidate mid-search:
    /// accept when E(X̂,T̂) <= E - relΔ·(1+|E|).
    pub rel_delta: f64,
    /// Multiplicative test E(X̂,T̂) < τ·E instead of the relative test.
    /// Only meaningful when energies are strictly positive.
    pub tau: Option<f64>,
    /// Consecutive segmentations with pixel I/U above this converge.
    pub converge_iou: f64,
    pub ranges: PoseCell,
    pub resolutions: [f64; 6],
    pub hint: Option<HintBox>,
    /// Start state; defaults to the bottom-up cut and the detection search.
    pub init: Option<(Segmentation, Pose)>,
}

impl Default for AmOptions {
    fn default() -> Self {
        Self {
            mode: AmMode::Full,
            max_iters: 10,
            rel_delta: 1e-4,
            tau: None,
            converge_iou: 0.98,
            ranges: bnb::default_ranges(),
            resolutions: bnb::default_resolutions(),
            hint: None,
            init: None,
        }
    }
}

/// One accepted state of the alternation.
#[derive(Debug, Clone)]
pub struct AmIteration {
    pub seg: Segmentation,
    pub pose: Pose,
    pub energy: f64,
}

#[derive(Debug, Clone)]
pub struct AmState {
    /// Number of completed iterations.
    pub iteration: usize,
    pub seg: Segmentation,
    pub pose: Pose,
    /// Energy after each accepted state, starting with the initial pair;
    /// length is `iteration + 1` and never increases step to step.
    pub trace: Vec<f64>,
    pub converged: bool,
    pub status: AmStatus,
    /// Accepted states aligned with `trace`.
    pub history: Vec<AmIteration>,
}

/// Pixel-weighted intersection-over-union of two superpixel labelings.
pub fn labeling_iou(scene: &SceneData, a: &Segmentation, b: &Segmentation) -> f64 {
    let mut inter = 0usize;
    let mut union = 0usize;
    for i in 0..scene.graph.sizes.len() {
        let size = scene.graph.sizes[i];
        if a[i] && b[i] {
            inter += size;
        }
        if a[i] || b[i] {
            union += size;
        }
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

fn accepts(e_hat: f64, e_cur: f64, opts: &AmOptions) -> bool {
    match opts.tau {
        Some(tau) => e_hat < tau * e_cur,
        None => e_hat <= e_cur - opts.rel_delta * (1.0 + e_cur.abs()),
    }
}

pub fn am_run(
    scene: &SceneData,
    weights: &EnergyWeights,
    opts: &AmOptions,
) -> Result<AmState, AmError> {
    let (seg0, pose0) = match &opts.init {
        Some((x, t)) => (x.clone(), *t),
        None => {
            let cut = min_cut(&scene.cut_costs(None, weights))?;
            let det = ScoreContext::detection(scene, weights);
            let res =
                bnb::branch_and_bound(&det, opts.ranges, opts.resolutions, opts.hint.as_ref())?;
            (cut.labels, res.best_pose)
        }
    };

    let mut energy = scene.total_energy(&seg0, &pose0, weights);
    let mut seg = seg0;
    let mut pose = pose0;
    let mut trace = vec![energy];
    let mut history = vec![AmIteration {
        seg: seg.clone(),
        pose,
        energy,
    }];

    let mut status = match opts.mode {
        AmMode::PoseOnly => {
            // Re-estimate the pose against the fixed segmentation. The new
            // pose scores at least as high as any grid pose, so the energy
            // cannot increase.
            let ctx = ScoreContext::given_seg(scene, weights, &seg);
            let res =
                bnb::branch_and_bound(&ctx, opts.ranges, opts.resolutions, opts.hint.as_ref())?;
            pose = res.best_pose;
            Some(AmStatus::HalfIteration)
        }
        AmMode::SegOnly => {
            let cut = min_cut(&scene.cut_costs(Some(&pose), weights))?;
            seg = cut.labels;
            Some(AmStatus::HalfIteration)
        }
        AmMode::Full => None,
    };

    if status.is_some() {
        energy = scene.total_energy(&seg, &pose, weights);
        trace.push(energy);
        history.push(AmIteration {
            seg: seg.clone(),
            pose,
            energy,
        });
    }

    let mut iteration = if status.is_some() { 1 } else { 0 };

    while status.is_none() {
        if iteration >= opts.max_iters {
            status = Some(AmStatus::MaxIters);
            break;
        }

        let ctx = ScoreContext::given_seg(scene, weights, &seg);
        let mut accepted: Option<(Segmentation, Pose, f64)> = None;
        let mut best: Option<(Segmentation, Pose, f64)> = None;
        let mut cut_err = None;
        bnb::search(
            &ctx,
            opts.ranges,
            opts.resolutions,
            opts.hint.as_ref(),
            |cell, _bound| {
                let t_hat = cell.center();
                let cut = match min_cut(&scene.cut_costs(Some(&t_hat), weights)) {
                    Ok(c) => c,
                    Err(e) => {
                        cut_err = Some(e);
                        return Visit::Stop;
                    }
                };
                let e_hat = scene.total_energy(&cut.labels, &t_hat, weights);
                if best.as_ref().map_or(true, |(_, _, b)| e_hat < *b) {
                    best = Some((cut.labels.clone(), t_hat, e_hat));
                }
                if accepts(e_hat, energy, opts) {
                    accepted = Some((cut.labels, t_hat, e_hat));
                    Visit::Stop
                } else {
                    Visit::Continue
                }
            },
        )?;
        if let Some(e) = cut_err {
            return Err(e.into());
        }

        let (next_seg, next_pose, next_energy) = match accepted {
            Some(found) => found,
            None => match best {
                // Queue exhausted: keep the best paired candidate unless it
                // would increase the energy.
                Some(found) if found.2 <= energy => found,
                _ => {
                    status = Some(AmStatus::NoImprovement);
                    break;
                }
            },
        };

        iteration += 1;
        let iou = labeling_iou(scene, &seg, &next_seg);
        seg = next_seg;
        pose = next_pose;
        energy = next_energy;
        trace.push(energy);
        history.push(AmIteration {
            seg: seg.clone(),
            pose,
            energy,
        });
        if iou > opts.converge_iou {
            status = Some(AmStatus::Converged);
        }
    }

    let status = status.unwrap();
    for pair in trace.windows(2) {
        assert!(
            pair[1] <= pair[0] + 1e-9,
            "energy trace increased: {} -> {}",
            pair[0],
            pair[1]
        );
    }

    Ok(AmState {
        iteration,
        seg,
        pose,
        trace,
        converged: status == AmStatus::Converged,
        status,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color_model::ColorModel;
    use crate::energy::{ModelKind, SceneOptions};
    use crate::synth::{self, NoiseParams};
    use crate::wireframe::gen_box;

    fn scene_setup(seed: u64, noise: &NoiseParams) -> (SceneData, synth::SyntheticScene) {
        let model = gen_box(4.0, 1.8, 1.5, 4);
        let scene = synth::generate(&model, None, noise, seed).unwrap();
        let cm = ColorModel::train_from_mask(&scene.image, &scene.mask, 0).unwrap();
        let data =
            SceneData::build(&scene.image, model, &cm, SceneOptions::default()).unwrap();
        (data, scene)
    }

    fn test_opts(scene: &synth::SyntheticScene) -> AmOptions {
        let truth = &scene.pose;
        let hint = HintBox::of_mask(&scene.mask).unwrap();
        AmOptions {
            ranges: PoseCell::from_ranges(
                (-180.0, 180.0),
                (0.0, 3.0),
                (0.0, 0.0),
                (truth.depth - 4.0, truth.depth + 4.0),
                (-13.75, 13.75),
                (-13.75, 13.75),
            ),
            resolutions: [5.625, 0.75, 0.0, 1.0, 3.4375, 3.4375],
            hint: Some(hint),
            ..AmOptions::default()
        }
    }

    fn volume_weights() -> EnergyWeights {
        EnergyWeights::new(ModelKind::Volume, [1.0, 0.5, 2.0, 0.004, 0.004]).unwrap()
    }

    #[test]
    fn converges_quickly_on_clean_scene() {
        let (data, scene) = scene_setup(17, &NoiseParams::noiseless());
        let weights = volume_weights();
        let opts = test_opts(&scene);
        let state = am_run(&data, &weights, &opts).unwrap();
        assert!(state.converged, "status {:?}", state.status);
        assert!(state.iteration <= 3, "took {} iterations", state.iteration);
        let final_mask = data.graph.labeling_mask(&state.seg);
        let iou = final_mask.iou(&scene.mask);
        assert!(iou >= 0.95, "final fg I/U {iou}");
    }

    #[test]
    fn restart_from_fixed_point_stops_in_one_iteration() {
        let (data, scene) = scene_setup(23, &NoiseParams::noiseless());
        let weights = volume_weights();
        let mut opts = test_opts(&scene);
        let mut state = am_run(&data, &weights, &opts).unwrap();
        // Iterate to a fixed point of both subproblems, then restart there.
        let mut settled = false;
        for _ in 0..40 {
            opts.init = Some((state.seg.clone(), state.pose));
            let next = am_run(&data, &weights, &opts).unwrap();
            settled = (next.trace.last().unwrap() - next.trace[0]).abs() < 1e-12
                && next.seg == state.seg
                && next.pose.to_line() == state.pose.to_line();
            state = next;
            if settled {
                break;
            }
        }
        assert!(settled, "no fixed point reached");
        opts.init = Some((state.seg.clone(), state.pose));
        let last = am_run(&data, &weights, &opts).unwrap();
        assert!(last.iteration <= 1, "took {} iterations", last.iteration);
        let spread = last.trace.last().unwrap() - last.trace[0];
        assert!(
            spread.abs() < 1e-12,
            "energy changed from a fixed point: {spread}"
        );
    }

    #[test]
    fn trace_is_non_increasing_on_noisy_scenes() {
        for seed in [3u64, 8, 15] {
            let (data, scene) = scene_setup(seed, &NoiseParams::noisy());
            let weights = volume_weights();
            let opts = test_opts(&scene);
            let state = am_run(&data, &weights, &opts).unwrap();
            for pair in state.trace.windows(2) {
                assert!(pair[1] <= pair[0] + 1e-9, "seed {seed}: {:?}", state.trace);
            }
            assert_eq!(state.trace.len(), state.iteration + 1);
            assert_eq!(state.history.len(), state.trace.len());
        }
    }

    #[test]
    fn half_iteration_modes_stop_after_one_update() {
        let (data, scene) = scene_setup(31, &NoiseParams::noisy());
        let weights = volume_weights();
        let mut opts = test_opts(&scene);

        opts.mode = AmMode::SegOnly;
        let seg_only = am_run(&data, &weights, &opts).unwrap();
        assert_eq!(seg_only.status, AmStatus::HalfIteration);
        assert_eq!(seg_only.iteration, 1);
        assert_eq!(seg_only.trace.len(), 2);
        assert!(seg_only.trace[1] <= seg_only.trace[0] + 1e-9);

        opts.mode = AmMode::PoseOnly;
        let pose_only = am_run(&data, &weights, &opts).unwrap();
        assert_eq!(pose_only.status, AmStatus::HalfIteration);
        assert_eq!(pose_only.trace.len(), 2);
        assert!(pose_only.trace[1] <= pose_only.trace[0] + 1e-9);
        // The segmentation half kept its pose; the pose half kept its cut.
        assert_eq!(pose_only.history[0].seg, pose_only.history[1].seg);
        assert_eq!(
            seg_only.history[0].pose.to_line(),
            seg_only.history[1].pose.to_line()
        );
    }
}


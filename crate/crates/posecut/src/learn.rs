//! Max-margin weight learning: Block-Coordinate Frank-Wolfe over per-example
//! hinge losses, with loss-augmented inference supplying the most violated
//! constraint and a thresholding step keeping every weight non-negative.

use std::fmt;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bnb::{self, BnbError};
use crate::bounds::ScoreContext;
use crate::energy::{EnergyWeights, ModelKind, SceneData, Segmentation, WeightsError};
use crate::geometry::{Pose, PoseCell};
use crate::interval::Interval;
use crate::mincut::{min_cut, MinCutError};

/// Azimuth error as a fraction of a full turn: `min(|a-b|, 360-|a-b|)/360`.
pub fn azimuth_loss(a: f64, a_star: f64) -> f64 {
    let d = (a - a_star).rem_euclid(360.0);
    d.min(360.0 - d) / 360.0
}

/// Exact maximum of `azimuth_loss(., a_star)` over an azimuth interval: the
/// antipode of the target if the interval reaches it, else an endpoint.
pub fn azimuth_loss_max(a: Interval, a_star: f64) -> f64 {
    if a.width() >= 360.0 {
        return 0.5;
    }
    let antipode_offset = (a_star + 180.0 - a.lo).rem_euclid(360.0);
    if a.lo + antipode_offset <= a.hi {
        return 0.5;
    }
    azimuth_loss(a.lo, a_star).max(azimuth_loss(a.hi, a_star))
}

/// Pixel-weighted Hamming distance between segmentations, normalized by the
/// image area.
pub fn hamming_loss(scene: &SceneData, x: &Segmentation, x_star: &Segmentation) -> f64 {
    let mut wrong = 0usize;
    for i in 0..scene.graph.sizes.len() {
        if x[i] != x_star[i] {
            wrong += scene.graph.sizes[i];
        }
    }
    wrong as f64 / scene.n_pixels()
}

/// Combined training loss: segmentation Hamming plus azimuth error.
pub fn pair_loss(
    scene: &SceneData,
    x: &Segmentation,
    x_star: &Segmentation,
    t: &Pose,
    t_star: &Pose,
) -> f64 {
    hamming_loss(scene, x, x_star) + azimuth_loss(t.azimuth, t_star.azimuth)
}

/// One annotated scene.
pub struct TrainingExample {
    pub scene: SceneData,
    pub seg_gt: Segmentation,
    pub pose_gt: Pose,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LearnMode {
    /// Constraints over segmentations at the ground-truth pose.
    Seg,
    /// Constraints over poses at the ground-truth segmentation.
    Pose,
    /// Constraints over joint (segmentation, pose) pairs.
    Joint,
}

#[derive(Debug)]
pub enum LearnError {
    EmptyDataset,
    /// Ground-truth pose outside the pose-search ranges.
    PoseOutOfRange(usize),
    /// Duality-gap estimate rose several epochs in a row.
    Diverged { gaps: Vec<f64> },
    Bnb(BnbError),
    Cut(MinCutError),
    Weights(WeightsError),
}

impl fmt::Display for LearnError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LearnError::EmptyDataset => write!(f, "training set is empty"),
            LearnError::PoseOutOfRange(i) => {
                write!(f, "example {i}: ground-truth pose outside search ranges")
            }
            LearnError::Diverged { gaps } => {
                write!(f, "duality gap rose 3 epochs straight: {gaps:?}")
            }
            LearnError::Bnb(e) => write!(f, "pose oracle failed: {e}"),
            LearnError::Cut(e) => write!(f, "segmentation oracle failed: {e}"),
            LearnError::Weights(e) => write!(f, "bad weights: {e}"),
        }
    }
}

impl std::error::Error for LearnError {}

impl From<BnbError> for LearnError {
    fn from(e: BnbError) -> Self {
        LearnError::Bnb(e)
    }
}

impl From<MinCutError> for LearnError {
    fn from(e: MinCutError) -> Self {
        LearnError::Cut(e)
    }
}

impl From<WeightsError> for LearnError {
    fn from(e: WeightsError) -> Self {
        LearnError::Weights(e)
    }
}

/// Most violating segmentation at the ground-truth pose: min-cut on the
/// energy with the Hamming loss folded into the unaries (scaled by
/// `loss_scale`; zero reduces to plain inference).
pub fn seg_oracle(
    ex: &TrainingExample,
    w: &EnergyWeights,
    loss_scale: f64,
) -> Result<Segmentation, MinCutError> {
    seg_oracle_at(ex, &ex.pose_gt, w, loss_scale)
}

fn seg_oracle_at(
    ex: &TrainingExample,
    pose: &Pose,
    w: &EnergyWeights,
    loss_scale: f64,
) -> Result<Segmentation, MinCutError> {
    let mut prob = ex.scene.cut_costs(Some(pose), w);
    let n_px = ex.scene.n_pixels();
    for i in 0..prob.unary.len() {
        let l = loss_scale * ex.scene.graph.sizes[i] as f64 / n_px;
        if ex.seg_gt[i] {
            prob.unary[i].0 -= l;
        } else {
            prob.unary[i].1 -= l;
        }
    }
    Ok(min_cut(&prob)?.labels)
}

/// Most violating pose at the ground-truth segmentation: branch-and-bound on
/// the pose score plus the azimuth loss (whose cell bound is its exact
/// maximum over the cell's azimuth interval).
pub fn pose_oracle(
    ex: &TrainingExample,
    w: &EnergyWeights,
    ranges: PoseCell,
    resolutions: [f64; 6],
    loss_scale: f64,
) -> Result<Pose, BnbError> {
    pose_oracle_at(ex, &ex.seg_gt, w, ranges, resolutions, loss_scale)
}

fn pose_oracle_at(
    ex: &TrainingExample,
    seg: &Segmentation,
    w: &EnergyWeights,
    ranges: PoseCell,
    resolutions: [f64; 6],
    loss_scale: f64,
) -> Result<Pose, BnbError> {
    let ctx = ScoreContext::given_seg(&ex.scene, w, seg)
        .with_azimuth_loss(ex.pose_gt.azimuth, loss_scale);
    Ok(bnb::branch_and_bound(&ctx, ranges, resolutions, None)?.best_pose)
}

/// Most violating joint pair, found by alternating the two single-variable
/// oracles starting from the ground truth.
pub fn joint_oracle(
    ex: &TrainingExample,
    w: &EnergyWeights,
    ranges: PoseCell,
    resolutions: [f64; 6],
    loss_scale: f64,
) -> Result<(Segmentation, Pose), LearnError> {
    let mut pose = pose_oracle(ex, w, ranges, resolutions, loss_scale)?;
    let mut seg = seg_oracle_at(ex, &pose, w, loss_scale)?;
    pose = pose_oracle_at(ex, &seg, w, ranges, resolutions, loss_scale)?;
    seg = seg_oracle_at(ex, &pose, w, loss_scale)?;
    Ok((seg, pose))
}

#[derive(Debug, Clone)]
pub struct BcfwOptions {
    pub mode: LearnMode,
    pub kind: ModelKind,
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Average the iterates with weights `2/(k+2)`; usually converges faster.
    pub weighted_averaging: bool,
    /// Stop once the duality-gap estimate falls to this value; the final
    /// iterate (which the gap certifies) is returned instead of the average.
    pub gap_tol: f64,
    /// Pose-search grid for the pose and joint oracles.
    pub ranges: PoseCell,
    pub resolutions: [f64; 6],
}

impl Default for BcfwOptions {
    fn default() -> Self {
        Self {
            mode: LearnMode::Seg,
            kind: ModelKind::Volume,
            lambda: 0.01,
            epochs: 20,
            seed: 0,
            weighted_averaging: true,
            gap_tol: 1e-10,
            ranges: bnb::default_ranges(),
            resolutions: bnb::default_resolutions(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EpochReport {
    pub epoch: usize,
    /// Frank-Wolfe duality-gap estimate at the epoch's final weights.
    pub gap: f64,
    /// Margin violations (positive slack) over the training set.
    pub violations: usize,
    pub max_slack: f64,
}

pub struct LearnerState {
    pub weights: EnergyWeights,
    /// Final (unaveraged) weight vector.
    pub last: [f64; 5],
    /// Per-example slack at the returned weights.
    pub slacks: Vec<f64>,
    pub gap: f64,
    pub lambda: f64,
    pub epochs: Vec<EpochReport>,
}

fn mask_for(kind: ModelKind, v: &mut [f64; 5]) {
    if kind == ModelKind::Shape {
        v[3] = 0.0;
        v[4] = 0.0;
    }
}

fn project(kind: ModelKind, v: [f64; 5]) -> [f64; 5] {
    let mut out = v.map(|c| c.max(0.0));
    mask_for(kind, &mut out);
    out
}

fn dot(a: &[f64; 5], b: &[f64; 5]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn make_weights(kind: ModelKind, v: &[f64; 5]) -> Result<EnergyWeights, WeightsError> {
    EnergyWeights::new(kind, project(kind, *v))
}

/// The most violated constraint for one example: returns the feature
/// difference `Psi(y) - Psi(y*)` (masked for the model kind) and the loss.
fn oracle(
    ex: &TrainingExample,
    w: &EnergyWeights,
    opts: &BcfwOptions,
) -> Result<([f64; 5], f64), LearnError> {
    let (seg, pose, delta) = match opts.mode {
        LearnMode::Seg => {
            let seg = seg_oracle(ex, w, 1.0)?;
            let delta = hamming_loss(&ex.scene, &seg, &ex.seg_gt);
            (seg, ex.pose_gt, delta)
        }
        LearnMode::Pose => {
            let pose = pose_oracle(ex, w, opts.ranges, opts.resolutions, 1.0)?;
            let delta = azimuth_loss(pose.azimuth, ex.pose_gt.azimuth);
            (ex.seg_gt.clone(), pose, delta)
        }
        LearnMode::Joint => {
            let (seg, pose) = joint_oracle(ex, w, opts.ranges, opts.resolutions, 1.0)?;
            let delta = pair_loss(&ex.scene, &seg, &ex.seg_gt, &pose, &ex.pose_gt);
            (seg, pose, delta)
        }
    };
    let psi_hat = ex.scene.feature_vector(&seg, &pose);
    let psi_gt = ex.scene.feature_vector(&ex.seg_gt, &ex.pose_gt);
    let mut diff = psi_hat.sub(&psi_gt).0;
    mask_for(opts.kind, &mut diff);
    Ok((diff, delta))
}

pub fn bcfw_train(
    data: &[TrainingExample],
    opts: &BcfwOptions,
) -> Result<LearnerState, LearnError> {
    if data.is_empty() {
        return Err(LearnError::EmptyDataset);
    }
    if opts.mode != LearnMode::Seg {
        for (i, ex) in data.iter().enumerate() {
            if !opts.ranges.contains(&ex.pose_gt) {
                return Err(LearnError::PoseOutOfRange(i));
            }
        }
    }

    let n = data.len();
    let lambda = opts.lambda;
    let mut w_i = vec![[0.0f64; 5]; n];
    let mut l_i = vec![0.0f64; n];
    let mut w_sum = [0.0f64; 5];
    let mut w_used = [0.0f64; 5];
    let mut w_avg = [0.0f64; 5];
    let mut k = 0usize;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut reports: Vec<EpochReport> = Vec::new();
    let mut rising = 0usize;
    let mut last_slacks = vec![0.0; n];
    let mut certified = false;

    for epoch in 1..=opts.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        for &i in &order {
            let weights = make_weights(opts.kind, &w_used)?;
            let (psi, delta) = oracle(&data[i], &weights, opts)?;
            let mut w_s = psi;
            for c in &mut w_s {
                *c /= lambda * n as f64;
            }
            let l_s = delta / n as f64;

            let mut diff = [0.0f64; 5];
            for c in 0..5 {
                diff[c] = w_i[i][c] - w_s[c];
            }
            let denom = lambda * dot(&diff, &diff);
            // Line search on the dual, taken at the projected weights.
            let gamma = if denom <= 1e-300 {
                0.0
            } else {
                ((lambda * dot(&w_used, &diff) - l_i[i] + l_s) / denom).clamp(0.0, 1.0)
            };

            for c in 0..5 {
                let updated = (1.0 - gamma) * w_i[i][c] + gamma * w_s[c];
                w_sum[c] += updated - w_i[i][c];
                w_i[i][c] = updated;
            }
            l_i[i] = (1.0 - gamma) * l_i[i] + gamma * l_s;

            w_used = project(opts.kind, w_sum);
            assert!(
                w_used.iter().all(|c| *c >= 0.0),
                "weights went negative: {w_used:?}"
            );

            k += 1;
            let rho = 2.0 / (k as f64 + 2.0);
            for c in 0..5 {
                w_avg[c] = (1.0 - rho) * w_avg[c] + rho * w_used[c];
            }
        }

        // Batch oracle pass for the duality-gap estimate and slack report.
        let weights = make_weights(opts.kind, &w_used)?;
        let batch: Vec<([f64; 5], f64)> = data
            .par_iter()
            .map(|ex| oracle(ex, &weights, opts))
            .collect::<Result<_, _>>()?;
        let mut gap = 0.0;
        let mut violations = 0usize;
        let mut max_slack = 0.0f64;
        for (i, (psi, delta)) in batch.iter().enumerate() {
            let mut w_s = *psi;
            for c in &mut w_s {
                *c /= lambda * n as f64;
            }
            let mut diff = [0.0f64; 5];
            for c in 0..5 {
                diff[c] = w_i[i][c] - w_s[c];
            }
            gap += lambda * dot(&w_used, &diff) - l_i[i] + delta / n as f64;
            let slack = (delta - dot(&w_used, psi)).max(0.0);
            last_slacks[i] = slack;
            if slack > 1e-9 {
                violations += 1;
            }
            max_slack = max_slack.max(slack);
        }
        let gap = gap.max(0.0);
        reports.push(EpochReport {
            epoch,
            gap,
            violations,
            max_slack,
        });
        if gap <= opts.gap_tol {
            certified = true;
            break;
        }

        if reports.len() >= 2 && gap > reports[reports.len() - 2].gap + 1e-12 {
            rising += 1;
            if rising >= 3 {
                return Err(LearnError::Diverged {
                    gaps: reports.iter().map(|r| r.gap).collect(),
                });
            }
        } else {
            rising = 0;
        }
    }

    let final_vec = if opts.weighted_averaging && !certified {
        w_avg
    } else {
        w_used
    };
    let weights = make_weights(opts.kind, &final_vec)?;

    // Slacks at the returned weights.
    let batch: Vec<([f64; 5], f64)> = data
        .par_iter()
        .map(|ex| oracle(ex, &weights, opts))
        .collect::<Result<_, _>>()?;
    let final_arr = project(opts.kind, final_vec);
    let slacks: Vec<f64> = batch
        .iter()
        .map(|(psi, delta)| (delta - dot(&final_arr, psi)).max(0.0))
        .collect();
    let gap = reports.last().map(|r| r.gap).unwrap_or(0.0);

    Ok(LearnerState {
        weights,
        last: w_used,
        slacks,
        gap,
        lambda,
        epochs: reports,
    })
}

/// Hinge slack of one example at fixed weights: how much the most violated
/// constraint is broken.
pub fn example_slack(
    ex: &TrainingExample,
    weights: &EnergyWeights,
    opts: &BcfwOptions,
) -> Result<f64, LearnError> {
    let (psi, delta) = oracle(ex, weights, opts)?;
    Ok((delta - dot(&weights.as_array(), &psi)).max(0.0))
}

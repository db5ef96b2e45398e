//! Windowed relative pose error between trajectories, including the
//! all-pairs evaluation over a trial set.

use std::sync::atomic::{AtomicUsize, Ordering};

use log::warn;
use nalgebra::Isometry3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::align::{umeyama_align_lenient, AlignMode};
use crate::error::{Error, Result};
use crate::trajectory::{
    associate, Pose, Timestamp, Trajectory, TrialSet, DEFAULT_MAX_DT, DEFAULT_WINDOW_FRAMES,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesRole {
    SingleEval,
    GtAverage,
    Estimate,
}

/// One translational error value per window, in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSeries {
    pub values: Vec<f64>,
    pub role: SeriesRole,
}

impl ErrorSeries {
    pub fn new(values: Vec<f64>, role: SeriesRole) -> Self {
        ErrorSeries { values, role }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            0.0
        } else {
            self.values.iter().sum::<f64>() / self.values.len() as f64
        }
    }
}

/// All pairwise errors for one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseErrorSet {
    pub window_index: usize,
    pub values: Vec<f64>,
    /// `(i, j)` trial indices, aligned with `values`.
    pub pairs: Vec<(usize, usize)>,
    pub n_trials: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RpeConfig {
    pub window_frames: usize,
    pub align: AlignMode,
    pub max_dt: f64,
}

impl Default for RpeConfig {
    fn default() -> Self {
        RpeConfig {
            window_frames: DEFAULT_WINDOW_FRAMES,
            align: AlignMode::Sim3,
            max_dt: DEFAULT_MAX_DT,
        }
    }
}

impl RpeConfig {
    pub fn new(window_frames: usize, align: AlignMode) -> Self {
        RpeConfig {
            window_frames,
            align,
            ..Default::default()
        }
    }
}

/// Relative pose error of `estimate` against `reference` for each window.
pub fn relative_pose_error(
    reference: &Trajectory,
    estimate: &Trajectory,
    window_frames: usize,
    align: AlignMode,
) -> Result<ErrorSeries> {
    evaluate_pair(reference, estimate, &RpeConfig::new(window_frames, align))
}

/// Core of [`relative_pose_error`] with an explicit association tolerance.
///
/// Both trajectories are reduced to their associated samples and windows are
/// laid over that matched sequence with the reference frame stride. For
/// window endpoints `(Q_a, Q_b)` in the reference and `(P_a, P_b)` in the
/// (aligned) estimate the error is the translation norm of
/// `(Q_a^-1 Q_b)^-1 (P_a^-1 P_b)`.
pub fn evaluate_pair(reference: &Trajectory, estimate: &Trajectory, cfg: &RpeConfig) -> Result<ErrorSeries> {
    let stride = reference.frame_stride();
    if cfg.window_frames == 0 || !cfg.window_frames.is_multiple_of(stride) {
        return Err(Error::validation(format!(
            "window of {} frames is not a positive multiple of the frame stride {stride}",
            cfg.window_frames
        )));
    }
    let matches = associate(reference, estimate, cfg.max_dt)?;
    let ref_poses: Vec<Pose> = matches.iter().map(|&(i, _)| reference.samples()[i].pose).collect();
    let mut est_poses: Vec<Pose> = matches.iter().map(|&(_, j)| estimate.samples()[j].pose).collect();

    if cfg.align != AlignMode::None {
        let rp: Vec<_> = ref_poses.iter().map(|p| p.position).collect();
        let ep: Vec<_> = est_poses.iter().map(|p| p.position).collect();
        let transform = umeyama_align_lenient(&rp, &ep, cfg.align == AlignMode::Sim3)?;
        for p in &mut est_poses {
            *p = transform.transform_pose(p);
        }
    }

    let step = cfg.window_frames / stride;
    let windows = (matches.len() - 1) / step;
    let values = (0..windows)
        .map(|k| {
            let (a, b) = (k * step, (k + 1) * step);
            window_error(&ref_poses[a], &ref_poses[b], &est_poses[a], &est_poses[b])
        })
        .collect();
    Ok(ErrorSeries::new(values, SeriesRole::SingleEval))
}

fn window_error(qa: &Pose, qb: &Pose, pa: &Pose, pb: &Pose) -> f64 {
    let rel = |a: &Pose, b: &Pose| -> Isometry3<f64> { a.to_isometry().inverse() * b.to_isometry() };
    let e = rel(qa, qb).inverse() * rel(pa, pb);
    e.translation.vector.norm()
}

/// Runs trajectory evaluations and counts how many it performed.
#[derive(Debug, Default)]
pub struct Evaluator {
    cfg: RpeConfig,
    evaluations: AtomicUsize,
}

impl Evaluator {
    pub fn new(cfg: RpeConfig) -> Self {
        Evaluator {
            cfg,
            evaluations: AtomicUsize::new(0),
        }
    }

    pub fn config(&self) -> &RpeConfig {
        &self.cfg
    }

    /// Trajectory evaluations performed so far.
    pub fn evaluations(&self) -> usize {
        self.evaluations.load(Ordering::Relaxed)
    }

    pub fn evaluate(&self, reference: &Trajectory, estimate: &Trajectory) -> Result<ErrorSeries> {
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        evaluate_pair(reference, estimate, &self.cfg)
    }

    /// Evaluates every unordered trial pair `{b_i, b_j}`, `i < j`, and groups
    /// the errors by window. Windows beyond the shortest pair result are
    /// dropped with a warning.
    pub fn pairwise(&self, trials: &TrialSet) -> Result<Vec<PairwiseErrorSet>> {
        let n = trials.n();
        if n < 2 {
            return Err(Error::validation("pairwise evaluation needs at least 2 trials"));
        }
        let trajs = trials.trajectories();
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
        let series = pairs
            .par_iter()
            .map(|&(i, j)| self.evaluate(&trajs[i], &trajs[j]))
            .collect::<Result<Vec<_>>>()?;

        let windows = common_prefix(series.iter().map(ErrorSeries::len), "pairwise evaluations");
        Ok((0..windows)
            .map(|k| PairwiseErrorSet {
                window_index: k,
                values: series.iter().map(|s| s.values[k]).collect(),
                pairs: pairs.clone(),
                n_trials: n,
            })
            .collect())
    }

    /// Per-window mean of the ground-truth-based error over all trials.
    pub fn average_gt_error(&self, gt: &Trajectory, trials: &TrialSet) -> Result<ErrorSeries> {
        let series = trials
            .trajectories()
            .par_iter()
            .map(|t| self.evaluate(gt, t))
            .collect::<Result<Vec<_>>>()?;
        let windows = common_prefix(series.iter().map(ErrorSeries::len), "ground-truth evaluations");
        let n = series.len() as f64;
        let values = (0..windows)
            .map(|k| series.iter().map(|s| s.values[k]).sum::<f64>() / n)
            .collect();
        Ok(ErrorSeries::new(values, SeriesRole::GtAverage))
    }
}

fn common_prefix(lens: impl Iterator<Item = usize>, what: &str) -> usize {
    let lens: Vec<usize> = lens.collect();
    let min = lens.iter().copied().min().unwrap_or(0);
    let max = lens.iter().copied().max().unwrap_or(0);
    if min != max {
        warn!("{what} cover between {min} and {max} windows; keeping the common {min}");
    }
    min
}

pub fn pairwise_rpe(trials: &TrialSet, window_frames: usize, align: AlignMode) -> Result<Vec<PairwiseErrorSet>> {
    Evaluator::new(RpeConfig::new(window_frames, align)).pairwise(trials)
}

pub fn average_gt_error(
    gt: &Trajectory,
    trials: &TrialSet,
    window_frames: usize,
    align: AlignMode,
) -> Result<ErrorSeries> {
    Evaluator::new(RpeConfig::new(window_frames, align)).average_gt_error(gt, trials)
}

/// Timestamp of each window's mid frame (or the nearest logged sample before it).
pub fn window_mid_timestamps(traj: &Trajectory, window_frames: usize, count: usize) -> Result<Vec<Timestamp>> {
    let windows = traj.windows(window_frames)?;
    Ok(windows
        .iter()
        .take(count)
        .map(|w| traj.samples()[w.mid_frame / traj.frame_stride()].timestamp)
        .collect())
}

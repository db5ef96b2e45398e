//! End-to-end glue shared by the command line and the playback service:
//! simulated sequence specs, per-window estimate and ground-truth reports,
//! and scoring one report against the other.

use serde::{Deserialize, Serialize};

use crate::align::AlignMode;
use crate::classify::{classify_with, score_with, BoundaryRule, ClassBoundaries, ErrorClass, F1Averaging, ScoreReport};
use crate::error::{Error, Result};
use crate::rpe::{window_mid_timestamps, ErrorSeries, Evaluator, RpeConfig, SeriesRole};
use crate::sim::{generate_ground_truth, generate_trials, DifficultyProfile, GtSpec, NoiseModel, PathShape};
use crate::trajectory::{Timestamp, Trajectory, TrialSet, DEFAULT_WINDOW_FRAMES};
use crate::uncertainty::{builtin_registry, estimate_with, UncertaintyEstimate, UncertaintySetting};

fn default_window_frames() -> usize {
    DEFAULT_WINDOW_FRAMES
}

/// A simulated input sequence: ground-truth path plus per-window difficulty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceSpec {
    #[serde(default)]
    pub shape: PathShape,
    pub difficulty: Vec<f64>,
    #[serde(default = "default_window_frames")]
    pub window_frames: usize,
    pub noise: NoiseModel,
}

impl SequenceSpec {
    pub fn profile(&self) -> Result<DifficultyProfile> {
        let mut p = DifficultyProfile::new(self.difficulty.clone())?;
        if self.window_frames == 0 {
            return Err(Error::validation("window must be positive"));
        }
        p.window_frames = self.window_frames;
        Ok(p)
    }

    pub fn gt_spec(&self) -> GtSpec {
        GtSpec::for_windows(self.shape, self.difficulty.len(), self.window_frames)
    }

    pub fn ground_truth(&self) -> Result<Trajectory> {
        generate_ground_truth(&self.gt_spec())
    }

    /// Trials `first..first + count` of this sequence.
    pub fn trials(&self, gt: &Trajectory, first: u64, count: usize) -> Result<Vec<Trajectory>> {
        generate_trials(gt, &self.profile()?, &self.noise, first, count)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub rpe: RpeConfig,
    /// Statistic name as registered in the built-in registry.
    pub setting: String,
    pub boundaries: ClassBoundaries,
    pub rule: BoundaryRule,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            rpe: RpeConfig::default(),
            setting: UncertaintySetting::default().name().to_string(),
            boundaries: ClassBoundaries::default(),
            rule: BoundaryRule::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowValue {
    pub window_index: usize,
    pub mid_timestamp: Timestamp,
    pub error_m: f64,
    pub class: ErrorClass,
}

/// Per-window error values with their classes. `source` is `estimate` for
/// pairwise estimates and `ground_truth` for ground-truth-based errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub source: SeriesRole,
    /// Statistic name, present for estimates only.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub setting: Option<String>,
    pub window_frames: usize,
    pub align: AlignMode,
    pub n_trials: usize,
    pub evaluations: usize,
    pub boundaries: ClassBoundaries,
    pub mean_error_m: f64,
    pub windows: Vec<WindowValue>,
}

impl ErrorReport {
    fn build(
        source: SeriesRole,
        setting: Option<String>,
        series: &ErrorSeries,
        mids: &[Timestamp],
        n_trials: usize,
        evaluations: usize,
        cfg: &PipelineConfig,
    ) -> Self {
        let classes = classify_with(series, &cfg.boundaries, cfg.rule);
        let windows = series
            .values
            .iter()
            .zip(mids)
            .zip(classes)
            .enumerate()
            .map(|(k, ((&e, &t), class))| WindowValue {
                window_index: k,
                mid_timestamp: t,
                error_m: e,
                class,
            })
            .collect();
        ErrorReport {
            source,
            setting,
            window_frames: cfg.rpe.window_frames,
            align: cfg.rpe.align,
            n_trials,
            evaluations,
            boundaries: cfg.boundaries,
            mean_error_m: series.mean(),
            windows,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        self.windows.iter().map(|w| w.error_m).collect()
    }

    pub fn classes(&self) -> Vec<ErrorClass> {
        self.windows.iter().map(|w| w.class).collect()
    }

    pub fn series(&self) -> ErrorSeries {
        ErrorSeries::new(self.values(), self.source)
    }

    /// The estimate as consumed by the scene builder.
    pub fn to_estimate(&self) -> Result<UncertaintyEstimate> {
        if self.source != SeriesRole::Estimate {
            return Err(Error::validation("report does not hold an uncertainty estimate"));
        }
        Ok(UncertaintyEstimate {
            series: self.series(),
            setting: self.setting.clone().unwrap_or_default(),
            n_trials: self.n_trials,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

fn mids(first: &Trajectory, window_frames: usize, count: usize) -> Result<Vec<Timestamp>> {
    let mids = window_mid_timestamps(first, window_frames, count)?;
    if mids.len() < count {
        return Err(Error::LengthMismatch(format!(
            "{count} windows but the first trial only spans {}",
            mids.len()
        )));
    }
    Ok(mids)
}

/// Ground-truth-free per-window estimate from an estimation trial set.
pub fn estimate_trials(trials: &TrialSet, cfg: &PipelineConfig) -> Result<ErrorReport> {
    let stat = builtin_registry().get(&cfg.setting)?;
    let evaluator = Evaluator::new(cfg.rpe);
    let pairwise = evaluator.pairwise(trials)?;
    let est = estimate_with(&pairwise, stat.as_ref())?;
    let mids = mids(&trials.trajectories()[0], cfg.rpe.window_frames, est.series.len())?;
    Ok(ErrorReport::build(
        SeriesRole::Estimate,
        Some(est.setting),
        &est.series,
        &mids,
        trials.n(),
        evaluator.evaluations(),
        cfg,
    ))
}

/// Ground-truth-based per-window error averaged over `trials`.
pub fn evaluate_trials(gt: &Trajectory, trials: &TrialSet, cfg: &PipelineConfig) -> Result<ErrorReport> {
    let evaluator = Evaluator::new(cfg.rpe);
    let series = evaluator.average_gt_error(gt, trials)?;
    if series.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mids = mids(gt, cfg.rpe.window_frames, series.len())?;
    Ok(ErrorReport::build(
        SeriesRole::GtAverage,
        None,
        &series,
        &mids,
        trials.n(),
        evaluator.evaluations(),
        cfg,
    ))
}

/// Scores an estimate report against a ground-truth report, re-classifying
/// both with `boundaries`.
pub fn score_reports(
    estimate: &ErrorReport,
    truth: &ErrorReport,
    boundaries: &ClassBoundaries,
    rule: BoundaryRule,
    averaging: F1Averaging,
) -> Result<ScoreReport> {
    if estimate.windows.len() != truth.windows.len() {
        return Err(Error::LengthMismatch(format!(
            "estimate has {} windows, ground truth has {}",
            estimate.windows.len(),
            truth.windows.len()
        )));
    }
    let predicted = classify_with(&estimate.series(), boundaries, rule);
    let actual = classify_with(&truth.series(), boundaries, rule);
    score_with(&predicted, &actual, averaging)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(seed: u64) -> SequenceSpec {
        SequenceSpec {
            shape: PathShape::Circle,
            difficulty: vec![0.0, 0.0, 1.0, 1.0, 0.0, 0.0],
            window_frames: 10,
            noise: NoiseModel::new(0.001, 0.03, seed),
        }
    }

    #[test]
    fn reports_line_up() {
        let s = spec(7);
        let gt = s.ground_truth().unwrap();
        let trials = TrialSet::estimation(s.trials(&gt, 0, 6).unwrap()).unwrap();
        let cfg = PipelineConfig::default();
        let est = estimate_trials(&trials, &cfg).unwrap();
        let truth = evaluate_trials(&gt, &trials, &cfg).unwrap();
        assert_eq!(est.windows.len(), 6);
        assert_eq!(truth.windows.len(), 6);
        assert_eq!(est.evaluations, 15);
        assert_eq!(truth.evaluations, 6);
        assert_eq!(est.setting.as_deref(), Some("trim_mean_30"));
        for (a, b) in est.windows.iter().zip(&truth.windows) {
            assert_eq!(a.mid_timestamp, b.mid_timestamp);
        }
        assert!(est.windows[2].error_m > 5.0 * est.windows[0].error_m);
        let score = score_reports(&est, &truth, &cfg.boundaries, cfg.rule, F1Averaging::Macro).unwrap();
        assert!(score.accuracy > 0.0);
    }

    #[test]
    fn report_json_round_trip() {
        let s = spec(1);
        let gt = s.ground_truth().unwrap();
        let trials = TrialSet::estimation(s.trials(&gt, 0, 3).unwrap()).unwrap();
        let est = estimate_trials(&trials, &PipelineConfig::default()).unwrap();
        let text = est.to_json().unwrap();
        let back: ErrorReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back.classes(), est.classes());
        assert_eq!(back.to_json().unwrap(), text);
        assert!(back.to_estimate().is_ok());
    }

    #[test]
    fn unknown_setting_and_mismatch() {
        let s = spec(2);
        let gt = s.ground_truth().unwrap();
        let trials = TrialSet::estimation(s.trials(&gt, 0, 3).unwrap()).unwrap();
        let cfg = PipelineConfig {
            setting: "mode".into(),
            ..PipelineConfig::default()
        };
        assert!(matches!(estimate_trials(&trials, &cfg), Err(Error::UnknownName { .. })));

        let est = estimate_trials(&trials, &PipelineConfig::default()).unwrap();
        let mut truth = evaluate_trials(&gt, &trials, &PipelineConfig::default()).unwrap();
        truth.windows.pop();
        let err = score_reports(&est, &truth, &ClassBoundaries::default(), BoundaryRule::default(), F1Averaging::Macro);
        assert!(matches!(err, Err(Error::LengthMismatch(_))));
        assert!(truth.to_estimate().is_err());
    }
}

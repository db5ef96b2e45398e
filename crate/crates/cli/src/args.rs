use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use puk_core::align::AlignMode;
use puk_core::classify::{BoundaryRule, ClassBoundaries, F1Averaging};
use puk_core::sim::PathShape;
use puk_core::uncertainty::builtin_registry;

#[derive(Debug, Parser)]
#[command(name = "puk", version, about = "Ground-truth-free pose error estimation from repeated SLAM trials")]
pub struct Cli {
    /// Log verbosity; repeat for more detail.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-window error of trials against a ground-truth trajectory.
    Evaluate(EvaluateArgs),
    /// Per-window error estimate from pairwise comparison of trials.
    Estimate(EstimateArgs),
    /// Generate a ground-truth path and simulated trials.
    Simulate(SimulateArgs),
    /// Score an estimate report against a ground-truth report.
    Score(ScoreArgs),
    /// Build a 3D scene document from a trajectory and an estimate report.
    Scene(SceneArgs),
    /// Run the playback orchestration service until interrupted.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    /// A value on a boundary moves up a class.
    PromoteUp,
    /// A value on a boundary stays in the lower class.
    KeepLow,
}

impl From<RuleArg> for BoundaryRule {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::PromoteUp => BoundaryRule::PromoteUp,
            RuleArg::KeepLow => BoundaryRule::KeepLow,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AveragingArg {
    Macro,
    Weighted,
}

impl From<AveragingArg> for F1Averaging {
    fn from(a: AveragingArg) -> Self {
        match a {
            AveragingArg::Macro => F1Averaging::Macro,
            AveragingArg::Weighted => F1Averaging::Weighted,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProfileArg {
    /// Difficulty rises linearly from 0 to 1.
    Ramp,
    /// Every window at `--level`.
    Flat,
}

fn count_at_least(s: &str, min: usize) -> Result<usize, String> {
    let n: usize = s.parse().map_err(|e| format!("{e}"))?;
    if n >= min {
        Ok(n)
    } else {
        Err(format!("must be at least {min}"))
    }
}

fn positive(s: &str) -> Result<usize, String> {
    count_at_least(s, 1)
}

fn at_least_two(s: &str) -> Result<usize, String> {
    count_at_least(s, 2)
}

fn parse_boundaries(s: &str) -> Result<ClassBoundaries, String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected C1,C2 in meters, got '{s}'"))?;
    let c1: f64 = a.trim().parse().map_err(|e| format!("bad C1: {e}"))?;
    let c2: f64 = b.trim().parse().map_err(|e| format!("bad C2: {e}"))?;
    ClassBoundaries::new(c1, c2).map_err(|e| e.to_string())
}

fn parse_setting(s: &str) -> Result<String, String> {
    let reg = builtin_registry();
    if reg.get(s).is_ok() {
        Ok(s.to_string())
    } else {
        let names: Vec<&str> = reg.names().collect();
        Err(format!("unknown setting '{s}' (known: {})", names.join(", ")))
    }
}

fn parse_difficulty(s: &str) -> Result<f64, String> {
    let d: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&d) {
        Ok(d)
    } else {
        Err(format!("difficulty {d} outside [0, 1]"))
    }
}

#[derive(Debug, Clone, Args)]
pub struct WindowArgs {
    /// Frames per evaluation window.
    #[arg(long, default_value_t = 10, value_parser = positive)]
    pub window_frames: usize,

    /// Alignment applied per window: sim3, se3 or none.
    #[arg(long, default_value = "sim3")]
    pub align: AlignMode,

    /// Maximum timestamp difference for associating samples, seconds.
    #[arg(long, default_value_t = puk_core::trajectory::DEFAULT_MAX_DT)]
    pub max_dt: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ClassArgs {
    /// Class boundaries C1,C2 in meters.
    #[arg(long, default_value = "0.05,0.10", value_parser = parse_boundaries)]
    pub boundaries: ClassBoundaries,

    /// Class of a value lying exactly on a boundary.
    #[arg(long, value_enum, default_value_t = RuleArg::PromoteUp)]
    pub boundary_rule: RuleArg,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Ground-truth trajectory (TUM format).
    #[arg(long = "reference", value_name = "FILE")]
    pub reference: PathBuf,

    /// Trial trajectories (TUM format).
    #[arg(required = true, num_args = 1.., value_name = "TRIAL")]
    pub trials: Vec<PathBuf>,

    #[command(flatten)]
    pub window: WindowArgs,

    #[command(flatten)]
    pub class: ClassArgs,

    /// Report path; stdout when absent.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Trial trajectories (TUM format), at least two.
    #[arg(required = true, num_args = 2.., value_name = "TRIAL")]
    pub trials: Vec<PathBuf>,

    /// Statistic applied to each window's pairwise errors.
    #[arg(long, default_value = "trim_mean_30", value_parser = parse_setting)]
    pub setting: String,

    #[command(flatten)]
    pub window: WindowArgs,

    #[command(flatten)]
    pub class: ClassArgs,

    /// Report path; stdout when absent.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Output directory.
    #[arg(short, long)]
    pub out: PathBuf,

    /// Ground-truth path shape: line, circle or figure_eight.
    #[arg(long, default_value = "circle")]
    pub shape: PathShape,

    /// Number of evaluation windows.
    #[arg(long, default_value_t = 20, value_parser = positive)]
    pub windows: usize,

    /// Frames per window.
    #[arg(long, default_value_t = 10, value_parser = positive)]
    pub window_frames: usize,

    /// Difficulty profile shape.
    #[arg(long, value_enum, default_value_t = ProfileArg::Ramp)]
    pub profile: ProfileArg,

    /// Difficulty of every window for the flat profile.
    #[arg(long, default_value_t = 0.5, value_parser = parse_difficulty)]
    pub level: f64,

    /// Explicit per-window difficulties; overrides --profile and --windows.
    #[arg(long, value_delimiter = ',', value_parser = parse_difficulty)]
    pub difficulty: Option<Vec<f64>>,

    /// Estimation trials to generate.
    #[arg(long, default_value_t = 30, value_parser = at_least_two)]
    pub trials: usize,

    /// Disjoint reference trials for ground-truth reports; 0 skips them.
    #[arg(long, default_value_t = 100)]
    pub reference_trials: usize,

    /// Per-frame position noise at zero difficulty, meters.
    #[arg(long, default_value_t = 0.002)]
    pub sigma_base: f64,

    /// Added per-frame position noise per unit difficulty, meters.
    #[arg(long, default_value_t = 0.2)]
    pub sigma_gain: f64,

    /// Per-frame rotation noise, radians.
    #[arg(long, default_value_t = 0.0)]
    pub rot_sigma: f64,

    /// Trials share one drift direction instead of independent noise.
    #[arg(long)]
    pub bias: bool,

    /// Drift per frame per unit difficulty in bias mode, meters.
    #[arg(long, default_value_t = 0.01)]
    pub bias_scale: f64,

    /// Seed for all generated noise.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Estimate report from `estimate`.
    pub estimate: PathBuf,

    /// Ground-truth report from `evaluate`.
    pub truth: PathBuf,

    #[command(flatten)]
    pub class: ClassArgs,

    /// F1 averaging across classes.
    #[arg(long, value_enum, default_value_t = AveragingArg::Macro)]
    pub averaging: AveragingArg,

    /// Score path; stdout when absent.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("depth_source").required(true).args(["depths", "planes"])))]
pub struct SceneArgs {
    /// Trajectory to draw (TUM format).
    #[arg(long)]
    pub trajectory: PathBuf,

    /// Estimate report from `estimate`.
    #[arg(long)]
    pub estimate: PathBuf,

    /// JSON list of per-window depth samples.
    #[arg(long)]
    pub depths: Option<PathBuf>,

    /// JSON list of planes to synthesize depths from.
    #[arg(long)]
    pub planes: Option<PathBuf>,

    /// Marker style: trajectory_only, exclamation or warning_sign.
    #[arg(long, default_value = "exclamation")]
    pub style: String,

    /// Maximum number of marked regions.
    #[arg(long, default_value_t = puk_core::scene::MAX_REGIONS)]
    pub max_regions: usize,

    /// Scene path; stdout when absent.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Listen address.
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,

    /// Listen port.
    #[arg(long, env = "PUK_PORT", default_value_t = 8080)]
    pub port: u16,

    /// Number of simulated playback workers.
    #[arg(long, env = "PUK_WORKERS", default_value_t = 4, value_parser = positive)]
    pub workers: usize,

    /// Wall seconds per second of sequence during playback; 0 is instant.
    #[arg(long, env = "PUK_RT_FACTOR", default_value_t = 0.0)]
    pub rt_factor: f64,

    /// Base seed combined with each submitted sequence's noise seed.
    #[arg(long, env = "PUK_SEED", default_value_t = 0)]
    pub seed: u64,

    /// Directory for job records and trial files.
    #[arg(long, env = "PUK_JOBS_DIR", default_value = "puk-jobs")]
    pub jobs_dir: PathBuf,
}

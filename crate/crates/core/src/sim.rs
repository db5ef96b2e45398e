//! Seeded stand-in for repeated SLAM playback.
//!
//! A trial is the ground truth plus an accumulated random walk whose step
//! size grows with the difficulty of the window being traversed, so trials
//! disagree more where error is high. In bias mode every trial additionally
//! drifts along one fixed direction per sequence, which makes trials wrong
//! in the same way.

use std::f64::consts::TAU;

use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rpe::{ErrorSeries, Evaluator, RpeConfig};
use crate::trajectory::{
    orientation_facing, Pose, Sample, Timestamp, Trajectory, TrialSet, DEFAULT_WINDOW_FRAMES,
};

/// Trial indices used by [`expected_error_oracle`], far away from the
/// indices callers use for estimation sets.
pub const ORACLE_TRIAL_OFFSET: u64 = 1 << 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathShape {
    #[default]
    Line,
    Circle,
    FigureEight,
}

impl std::str::FromStr for PathShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "line" => Ok(PathShape::Line),
            "circle" => Ok(PathShape::Circle),
            "figure_eight" | "figure-eight" => Ok(PathShape::FigureEight),
            other => Err(Error::UnknownName {
                kind: "path shape",
                name: other.to_string(),
            }),
        }
    }
}

fn default_frame_rate() -> f64 {
    30.0
}

fn default_speed() -> f64 {
    1.0
}

fn default_radius() -> f64 {
    2.0
}

fn default_height() -> f64 {
    1.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtSpec {
    #[serde(default)]
    pub shape: PathShape,
    /// Seconds.
    pub duration: f64,
    #[serde(default = "default_frame_rate")]
    pub frame_rate: f64,
    /// Meters per second along the path.
    #[serde(default = "default_speed")]
    pub speed: f64,
    /// Circle radius or figure-eight half width, meters.
    #[serde(default = "default_radius")]
    pub radius: f64,
    /// Constant height above the floor (+y), meters.
    #[serde(default = "default_height")]
    pub height: f64,
}

impl GtSpec {
    pub fn new(shape: PathShape, duration: f64) -> Self {
        GtSpec {
            shape,
            duration,
            frame_rate: default_frame_rate(),
            speed: default_speed(),
            radius: default_radius(),
            height: default_height(),
        }
    }

    /// Spec covering exactly `windows` windows of `window_frames` frames.
    pub fn for_windows(shape: PathShape, windows: usize, window_frames: usize) -> Self {
        let mut spec = GtSpec::new(shape, 0.0);
        spec.duration = (windows * window_frames) as f64 / spec.frame_rate;
        spec
    }

    pub fn frame_count(&self) -> usize {
        (self.duration * self.frame_rate).round() as usize
    }

    fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.frame_rate) || !positive(self.duration) {
            return Err(Error::Simulation("duration and frame rate must be positive".into()));
        }
        if !positive(self.speed) {
            return Err(Error::Simulation(format!("degenerate speed {}", self.speed)));
        }
        if self.shape != PathShape::Line && !positive(self.radius) {
            return Err(Error::Simulation(format!("degenerate radius {}", self.radius)));
        }
        if self.frame_count() < DEFAULT_WINDOW_FRAMES {
            return Err(Error::Simulation(format!(
                "{} frames do not fill one {DEFAULT_WINDOW_FRAMES}-frame window",
                self.frame_count()
            )));
        }
        Ok(())
    }

    /// Position and unit direction of travel at time `t`.
    fn state(&self, t: f64) -> (Vector3<f64>, Vector3<f64>) {
        let h = self.height;
        match self.shape {
            PathShape::Line => (Vector3::new(self.speed * t, h, 0.0), Vector3::x()),
            PathShape::Circle => {
                let r = self.radius;
                let th = self.speed * t / r;
                (
                    Vector3::new(r * th.cos(), h, r * th.sin()),
                    Vector3::new(-th.sin(), 0.0, th.cos()),
                )
            }
            PathShape::FigureEight => {
                // lemniscate of Gerono, parameter advanced at roughly `speed`
                let r = self.radius;
                let th = (self.speed * t / r) % TAU;
                (
                    Vector3::new(r * th.sin(), h, 0.5 * r * (2.0 * th).sin()),
                    Vector3::new(th.cos(), 0.0, (2.0 * th).cos()).normalize(),
                )
            }
        }
    }
}

/// Smooth ground truth sampled every frame, camera facing the direction of
/// travel. Frames run from 0 to `round(duration * frame_rate)` inclusive.
pub fn generate_ground_truth(spec: &GtSpec) -> Result<Trajectory> {
    spec.validate()?;
    let samples = (0..=spec.frame_count())
        .map(|f| {
            let t = f as f64 / spec.frame_rate;
            let (p, dir) = spec.state(t);
            Ok(Sample {
                timestamp: Timestamp::from_secs_f64(t)?,
                pose: Pose::new(p, orientation_facing(&dir, &Vector3::y())),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new("gt", samples, 1)
}

fn default_window_frames() -> usize {
    DEFAULT_WINDOW_FRAMES
}

/// Per-window difficulty in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifficultyProfile {
    pub d: Vec<f64>,
    #[serde(default = "default_window_frames")]
    pub window_frames: usize,
}

impl DifficultyProfile {
    pub fn new(d: Vec<f64>) -> Result<Self> {
        if let Some(v) = d.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::validation(format!("difficulty {v} outside [0, 1]")));
        }
        Ok(DifficultyProfile {
            d,
            window_frames: DEFAULT_WINDOW_FRAMES,
        })
    }

    pub fn flat(windows: usize, d: f64) -> Result<Self> {
        Self::new(vec![d; windows])
    }

    /// Linear ramp from 0 to 1.
    pub fn ramp(windows: usize) -> Result<Self> {
        let denom = windows.saturating_sub(1).max(1) as f64;
        Self::new((0..windows).map(|k| k as f64 / denom).collect())
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    fn validate(&self) -> Result<()> {
        Self::new(self.d.clone()).map(|_| ())?;
        if self.window_frames == 0 {
            return Err(Error::validation("profile window must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Per-frame translational step deviation at zero difficulty, meters.
    pub sigma_base: f64,
    /// Added step deviation per unit difficulty, meters per frame.
    pub sigma_gain: f64,
    /// Per-frame rotational step deviation, radians.
    #[serde(default)]
    pub rot_sigma: f64,
    #[serde(default)]
    pub bias_mode: bool,
    /// Drift per frame per unit difficulty in bias mode, meters.
    #[serde(default)]
    pub bias_scale: f64,
    #[serde(default)]
    pub seed: u64,
}

impl NoiseModel {
    pub fn zero() -> Self {
        NoiseModel {
            sigma_base: 0.0,
            sigma_gain: 0.0,
            rot_sigma: 0.0,
            bias_mode: false,
            bias_scale: 0.0,
            seed: 0,
        }
    }

    pub fn new(sigma_base: f64, sigma_gain: f64, seed: u64) -> Self {
        NoiseModel {
            sigma_base,
            sigma_gain,
            seed,
            ..Self::zero()
        }
    }

    fn validate(&self) -> Result<()> {
        let vals = [self.sigma_base, self.sigma_gain, self.rot_sigma, self.bias_scale];
        if vals.iter().any(|v| v.is_nan() || *v < 0.0 || !v.is_finite()) {
            return Err(Error::validation("noise parameters must be finite and non-negative"));
        }
        Ok(())
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream seed for one trial: `splitmix64(seed ^ splitmix64(trial_index))`.
/// Changing this breaks every stored golden file.
pub fn trial_seed(seed: u64, trial_index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(trial_index))
}

fn gaussian3(rng: &mut ChaCha8Rng, sigma: f64) -> Vector3<f64> {
    Vector3::new(
        rng.sample::<f64, _>(StandardNormal),
        rng.sample::<f64, _>(StandardNormal),
        rng.sample::<f64, _>(StandardNormal),
    ) * sigma
}

/// Fixed drift direction of a sequence in bias mode.
pub fn bias_direction(seed: u64) -> Vector3<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ 0xB1A5_D1EC_7104_0000));
    loop {
        let v = gaussian3(&mut rng, 1.0);
        if v.norm() > 1e-6 {
            return v.normalize();
        }
    }
}

/// One simulated trial of `gt`. Identical inputs always give the identical
/// trajectory.
pub fn generate_trial(
    gt: &Trajectory,
    profile: &DifficultyProfile,
    noise: &NoiseModel,
    trial_index: u64,
) -> Result<Trajectory> {
    profile.validate()?;
    noise.validate()?;
    let window_frames = profile.window_frames;
    let windows = gt.windows(window_frames)?.len();
    if profile.len() != windows {
        return Err(Error::LengthMismatch(format!(
            "difficulty profile has {} windows, trajectory has {windows}",
            profile.len()
        )));
    }
    if windows == 0 {
        return Err(Error::Simulation("trajectory shorter than one window".into()));
    }

    let stride = gt.frame_stride();
    let step_scale = (stride as f64).sqrt();
    let drift_dir = bias_direction(noise.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(noise.seed, trial_index));

    let mut offset = Vector3::zeros();
    let mut rot = Vector3::zeros();
    let mut samples = Vec::with_capacity(gt.len());
    for (i, s) in gt.samples().iter().enumerate() {
        if i > 0 {
            let frame = i * stride;
            // the step into `frame` happens inside the window holding frame - 1
            let k = ((frame - 1) / window_frames).min(windows - 1);
            let d = profile.d[k];
            if noise.bias_mode {
                offset += gaussian3(&mut rng, noise.sigma_base * step_scale);
                offset += drift_dir * (noise.bias_scale * d * stride as f64);
            } else {
                let sigma = noise.sigma_base + noise.sigma_gain * d;
                offset += gaussian3(&mut rng, sigma * step_scale);
            }
            if noise.rot_sigma > 0.0 {
                rot += gaussian3(&mut rng, noise.rot_sigma * step_scale);
            }
        }
        let orientation = if noise.rot_sigma > 0.0 {
            UnitQuaternion::from_scaled_axis(rot) * s.pose.orientation
        } else {
            s.pose.orientation
        };
        samples.push(Sample {
            timestamp: s.timestamp,
            pose: Pose::new(s.pose.position + offset, orientation),
        });
    }
    Trajectory::new(format!("trial_{trial_index:04}"), samples, stride)
}

/// Trials `first..first + count`, generated in parallel.
pub fn generate_trials(
    gt: &Trajectory,
    profile: &DifficultyProfile,
    noise: &NoiseModel,
    first: u64,
    count: usize,
) -> Result<Vec<Trajectory>> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| generate_trial(gt, profile, noise, first + i))
        .collect()
}

/// Ground-truth-based error averaged over `n` fresh trials.
pub fn expected_error_oracle(
    gt: &Trajectory,
    profile: &DifficultyProfile,
    noise: &NoiseModel,
    n: usize,
) -> Result<ErrorSeries> {
    if n < 100 {
        return Err(Error::validation(format!("oracle needs at least 100 trials, got {n}")));
    }
    let trials = generate_trials(gt, profile, noise, ORACLE_TRIAL_OFFSET, n)?;
    let cfg = RpeConfig {
        window_frames: profile.window_frames,
        ..RpeConfig::default()
    };
    Evaluator::new(cfg).average_gt_error(gt, &TrialSet::reference(trials)?)
}

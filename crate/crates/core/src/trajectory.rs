//! Timestamped pose trajectories, timestamp association and sub-trajectory
//! windowing.
//!
//! Frames are counted in camera frames. A trajectory logs one sample every
//! `frame_stride` frames, so sample `i` sits at frame `i * frame_stride` and
//! the trajectory spans `(len - 1) * frame_stride` frames.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Isometry3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_FRAME_STRIDE: usize = 5;
pub const DEFAULT_WINDOW_FRAMES: usize = 10;
pub const DEFAULT_MAX_DT: f64 = 0.01;

const NANOS_PER_SEC: u64 = 1_000_000_000;

/// Non-negative time in integer nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Timestamp(u64);

impl Timestamp {
    pub const fn from_nanos(nanos: u64) -> Self {
        Timestamp(nanos)
    }

    pub fn from_secs_f64(secs: f64) -> Result<Self> {
        if !secs.is_finite() || secs < 0.0 {
            return Err(Error::validation(format!("invalid timestamp {secs}")));
        }
        Ok(Timestamp((secs * NANOS_PER_SEC as f64).round() as u64))
    }

    pub const fn as_nanos(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        (self.0 / NANOS_PER_SEC) as f64 + (self.0 % NANOS_PER_SEC) as f64 * 1e-9
    }

    /// Absolute difference in seconds.
    pub fn abs_diff_secs(self, other: Timestamp) -> f64 {
        self.0.abs_diff(other.0) as f64 * 1e-9
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:09}", self.0 / NANOS_PER_SEC, self.0 % NANOS_PER_SEC)
    }
}

impl FromStr for Timestamp {
    type Err = String;

    /// Parses decimal seconds exactly down to the nanosecond. Extra fractional
    /// digits are rounded; exponent notation falls back to `f64` parsing.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("invalid timestamp '{s}'");
        if s.contains(['e', 'E']) {
            let secs: f64 = s.parse().map_err(|_| bad())?;
            return Timestamp::from_secs_f64(secs).map_err(|e| e.to_string());
        }
        let s = s.strip_prefix('+').unwrap_or(s);
        if s.starts_with('-') {
            return Err(format!("negative timestamp '{s}'"));
        }
        let (int_part, frac_part) = match s.split_once('.') {
            Some((i, f)) => (i, f),
            None => (s, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(bad());
        }
        let all_digits = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
        if !all_digits(int_part) || !all_digits(frac_part) {
            return Err(bad());
        }
        let secs: u64 = if int_part.is_empty() {
            0
        } else {
            int_part.parse().map_err(|_| bad())?
        };
        let mut nanos: u64 = 0;
        let mut digits = frac_part.bytes();
        for _ in 0..9 {
            nanos = nanos * 10 + digits.next().map_or(0, |b| (b - b'0') as u64);
        }
        if digits.next().is_some_and(|b| b >= b'5') {
            nanos += 1;
        }
        secs.checked_mul(NANOS_PER_SEC)
            .and_then(|v| v.checked_add(nanos))
            .map(Timestamp)
            .ok_or_else(bad)
    }
}

impl Serialize for Timestamp {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        // nearest double to the exact decimal, so it prints without noise
        let secs: f64 = self.to_string().parse().map_err(serde::ser::Error::custom)?;
        serializer.serialize_f64(secs)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let secs = f64::deserialize(deserializer)?;
        Timestamp::from_secs_f64(secs).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

impl Pose {
    pub fn new(position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Pose {
            position,
            orientation,
        }
    }

    pub fn identity() -> Self {
        Pose::new(Vector3::zeros(), UnitQuaternion::identity())
    }

    /// Camera viewing direction: the orientation applied to `-z`.
    pub fn forward(&self) -> Vector3<f64> {
        self.orientation * -Vector3::z()
    }

    pub fn to_isometry(&self) -> Isometry3<f64> {
        Isometry3::from_parts(Translation3::from(self.position), self.orientation)
    }

    pub fn from_isometry(iso: &Isometry3<f64>) -> Self {
        Pose::new(iso.translation.vector, iso.rotation)
    }
}

/// Orientation whose camera forward axis (`-z`) points along `direction`
/// with `+y` as close to `up` as possible.
///
/// Falls back to `+z` as the up hint when `direction` is parallel to `up`.
pub fn orientation_facing(direction: &Vector3<f64>, up: &Vector3<f64>) -> UnitQuaternion<f64> {
    let dir = direction.normalize();
    let up = if dir.cross(up).norm() < 1e-9 {
        Vector3::z()
    } else {
        *up
    };
    // face_towards maps +z onto its first argument.
    UnitQuaternion::face_towards(&-dir, &up)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub timestamp: Timestamp,
    pub pose: Pose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    id: String,
    samples: Vec<Sample>,
    frame_stride: usize,
}

impl Trajectory {
    /// Builds a trajectory, rejecting non-increasing timestamps.
    pub fn new(id: impl Into<String>, samples: Vec<Sample>, frame_stride: usize) -> Result<Self> {
        if frame_stride == 0 {
            return Err(Error::validation("frame stride must be positive"));
        }
        if let Some(i) = samples
            .windows(2)
            .position(|w| w[1].timestamp <= w[0].timestamp)
        {
            return Err(Error::validation(format!(
                "timestamps not strictly increasing at sample {} ({} after {})",
                i + 1,
                samples[i + 1].timestamp,
                samples[i].timestamp
            )));
        }
        Ok(Trajectory {
            id: id.into(),
            samples,
            frame_stride,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn frame_stride(&self) -> usize {
        self.frame_stride
    }

    pub fn poses(&self) -> impl ExactSizeIterator<Item = &Pose> + '_ {
        self.samples.iter().map(|s| &s.pose)
    }

    pub fn positions(&self) -> Vec<Vector3<f64>> {
        self.samples.iter().map(|s| s.pose.position).collect()
    }

    /// Frames spanned from the first to the last sample.
    pub fn total_frames(&self) -> usize {
        self.samples.len().saturating_sub(1) * self.frame_stride
    }

    /// Seconds between the first and the last sample.
    pub fn duration(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.timestamp.abs_diff_secs(a.timestamp),
            _ => 0.0,
        }
    }

    /// Applies `iso` to every pose (left multiplication).
    pub fn transformed(&self, iso: &Isometry3<f64>) -> Trajectory {
        let samples = self
            .samples
            .iter()
            .map(|s| Sample {
                timestamp: s.timestamp,
                pose: Pose::from_isometry(&(iso * s.pose.to_isometry())),
            })
            .collect();
        Trajectory {
            id: self.id.clone(),
            samples,
            frame_stride: self.frame_stride,
        }
    }

    /// Keeps every `factor`-th sample; the stride grows accordingly.
    pub fn downsampled(&self, factor: usize) -> Result<Trajectory> {
        if factor == 0 {
            return Err(Error::validation("downsample factor must be positive"));
        }
        Ok(Trajectory {
            id: self.id.clone(),
            samples: self.samples.iter().step_by(factor).copied().collect(),
            frame_stride: self.frame_stride * factor,
        })
    }

    /// Non-overlapping windows of `window_frames` frames.
    pub fn windows(&self, window_frames: usize) -> Result<Vec<SubTrajectoryWindow>> {
        if window_frames == 0 || !window_frames.is_multiple_of(self.frame_stride) {
            return Err(Error::validation(format!(
                "window of {window_frames} frames is not a positive multiple of the frame stride {}",
                self.frame_stride
            )));
        }
        Ok(windows_for_frames(self.total_frames(), window_frames))
    }

    /// Path length from sample 0 to `up_to_sample`, clamped to the last sample.
    pub fn arc_length(&self, up_to_sample: usize) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        let end = up_to_sample.min(self.samples.len() - 1);
        self.samples[..=end]
            .windows(2)
            .map(|w| (w[1].pose.position - w[0].pose.position).norm())
            .sum()
    }

    /// Arc length at every sample, starting at 0.
    pub fn cumulative_arc_lengths(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.samples.len());
        for (i, s) in self.samples.iter().enumerate() {
            if i > 0 {
                acc += (s.pose.position - self.samples[i - 1].pose.position).norm();
            }
            out.push(acc);
        }
        out
    }

    /// Sample index holding `frame`, if it was logged.
    pub fn sample_at_frame(&self, frame: usize) -> Option<usize> {
        frame.is_multiple_of(self.frame_stride)
            .then_some(frame / self.frame_stride)
            .filter(|&i| i < self.samples.len())
    }
}

/// One sub-trajectory: frames `[start_frame, end_frame]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubTrajectoryWindow {
    pub index: usize,
    pub start_frame: usize,
    pub mid_frame: usize,
    pub end_frame: usize,
    pub window_frames: usize,
}

impl SubTrajectoryWindow {
    pub fn contains_frame(&self, frame: usize) -> bool {
        (self.start_frame..=self.end_frame).contains(&frame)
    }
}

/// `floor(total_frames / window_frames)` windows tiling `[0, W * count]`;
/// trailing frames are dropped.
pub fn windows_for_frames(total_frames: usize, window_frames: usize) -> Vec<SubTrajectoryWindow> {
    if window_frames == 0 {
        return Vec::new();
    }
    (0..total_frames / window_frames)
        .map(|k| {
            let start = k * window_frames;
            SubTrajectoryWindow {
                index: k,
                start_frame: start,
                mid_frame: start + window_frames / 2,
                end_frame: start + window_frames,
                window_frames,
            }
        })
        .collect()
}

fn nearest(samples: &[Sample], t: Timestamp) -> Option<usize> {
    if samples.is_empty() {
        return None;
    }
    let upper = samples.partition_point(|s| s.timestamp < t);
    let candidates = [upper.checked_sub(1), (upper < samples.len()).then_some(upper)];
    candidates
        .into_iter()
        .flatten()
        .min_by(|&a, &b| {
            let da = samples[a].timestamp.as_nanos().abs_diff(t.as_nanos());
            let db = samples[b].timestamp.as_nanos().abs_diff(t.as_nanos());
            da.cmp(&db).then(a.cmp(&b))
        })
}

/// Matches reference and estimate samples by timestamp.
///
/// A pair `(i, j)` is kept when `j` is the nearest estimate sample to `i`,
/// `i` is the nearest reference sample to `j`, and they are at most `max_dt`
/// seconds apart. Mutual nearest neighbours are one-to-one, time-ordered,
/// and symmetric in the argument order.
pub fn associate(reference: &Trajectory, estimate: &Trajectory, max_dt: f64) -> Result<Vec<(usize, usize)>> {
    if max_dt.is_nan() || max_dt <= 0.0 {
        return Err(Error::validation(format!("max_dt must be positive, got {max_dt}")));
    }
    let max_dt_ns = (max_dt * NANOS_PER_SEC as f64).round() as u64;
    let ref_samples = reference.samples();
    let est_samples = estimate.samples();
    let pairs: Vec<(usize, usize)> = ref_samples
        .iter()
        .enumerate()
        .filter_map(|(i, s)| {
            let j = nearest(est_samples, s.timestamp)?;
            let back = nearest(ref_samples, est_samples[j].timestamp)?;
            let dt = s.timestamp.as_nanos().abs_diff(est_samples[j].timestamp.as_nanos());
            (back == i && dt <= max_dt_ns).then_some((i, j))
        })
        .collect();
    if pairs.len() < 2 {
        return Err(Error::Association {
            matched: pairs.len(),
        });
    }
    Ok(pairs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialSetLabel {
    /// Trials whose pairwise diversity produces the estimate.
    Estimation,
    /// Disjoint trials scored against ground truth.
    Reference,
}

#[derive(Debug, Clone)]
pub struct TrialSet {
    label: TrialSetLabel,
    trajectories: Vec<Trajectory>,
}

impl TrialSet {
    pub fn new(label: TrialSetLabel, trajectories: Vec<Trajectory>) -> Result<Self> {
        let min = match label {
            TrialSetLabel::Estimation => 2,
            TrialSetLabel::Reference => 1,
        };
        if trajectories.len() < min {
            return Err(Error::validation(format!(
                "{label:?} trial set needs at least {min} trajectories, got {}",
                trajectories.len()
            )));
        }
        Ok(TrialSet {
            label,
            trajectories,
        })
    }

    pub fn estimation(trajectories: Vec<Trajectory>) -> Result<Self> {
        Self::new(TrialSetLabel::Estimation, trajectories)
    }

    pub fn reference(trajectories: Vec<Trajectory>) -> Result<Self> {
        Self::new(TrialSetLabel::Reference, trajectories)
    }

    pub fn label(&self) -> TrialSetLabel {
        self.label
    }

    pub fn n(&self) -> usize {
        self.trajectories.len()
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn grid(n: usize, rate: f64, offset: f64, stride: usize) -> Trajectory {
        let samples = (0..n)
            .map(|i| Sample {
                timestamp: Timestamp::from_secs_f64(offset + i as f64 / rate).unwrap(),
                pose: Pose::new(Vector3::new(i as f64 * 0.1, 0.0, 0.0), UnitQuaternion::identity()),
            })
            .collect();
        Trajectory::new("grid", samples, stride).unwrap()
    }

    #[test]
    fn timestamp_text_is_exact() {
        let t: Timestamp = "1403636579.758555650".parse().unwrap();
        assert_eq!(t.as_nanos(), 1_403_636_579_758_555_650);
        assert_eq!(t.to_string(), "1403636579.758555650");
        assert_eq!("12".parse::<Timestamp>().unwrap().as_nanos(), 12 * NANOS_PER_SEC);
        assert_eq!(".5".parse::<Timestamp>().unwrap().as_nanos(), 500_000_000);
        assert_eq!("0.0000000015".parse::<Timestamp>().unwrap().as_nanos(), 2);
        assert_eq!("1.5e0".parse::<Timestamp>().unwrap().as_nanos(), 1_500_000_000);
        assert!("-1.0".parse::<Timestamp>().is_err());
        assert!("1.2.3".parse::<Timestamp>().is_err());
        assert!("abc".parse::<Timestamp>().is_err());
    }

    #[test]
    fn rejects_non_monotonic_timestamps() {
        let s = Sample {
            timestamp: Timestamp::from_nanos(5),
            pose: Pose::identity(),
        };
        let err = Trajectory::new("x", vec![s, s], 5).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn window_arithmetic() {
        let w = windows_for_frames(100, 10);
        assert_eq!(w.len(), 10);
        assert_eq!((w[0].start_frame, w[0].mid_frame, w[0].end_frame), (0, 5, 10));
        assert_eq!(windows_for_frames(105, 10).len(), 10);
        assert!(windows_for_frames(8, 10).is_empty());
    }

    #[test]
    fn windows_tile_without_overlap() {
        for total in 0..200 {
            let w = windows_for_frames(total, 10);
            for (k, win) in w.iter().enumerate() {
                assert_eq!(win.start_frame, 10 * k);
                assert_eq!(win.end_frame - win.start_frame, 10);
                if k > 0 {
                    assert_eq!(w[k - 1].end_frame, win.start_frame);
                }
            }
            assert_eq!(w.last().map_or(0, |x| x.end_frame), 10 * (total / 10));
        }
    }

    #[test]
    fn trajectory_windows_use_stride() {
        // 21 samples every 5 frames span 100 frames.
        let t = grid(21, 6.0, 0.0, 5);
        assert_eq!(t.total_frames(), 100);
        assert_eq!(t.windows(10).unwrap().len(), 10);
        assert!(t.windows(7).is_err());
        assert_eq!(t.sample_at_frame(15), Some(3));
        assert_eq!(t.sample_at_frame(16), None);
    }

    #[test]
    fn arc_length_cases() {
        let t = grid(11, 30.0, 0.0, 5);
        assert!((t.arc_length(5) - 0.5).abs() < 1e-12);
        let single = grid(1, 30.0, 0.0, 5);
        assert_eq!(single.arc_length(0), 0.0);

        let corners = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.0, 0.0)];
        let samples = corners
            .iter()
            .enumerate()
            .map(|(i, &(x, z))| Sample {
                timestamp: Timestamp::from_nanos(i as u64),
                pose: Pose::new(Vector3::new(x, 0.0, z), UnitQuaternion::identity()),
            })
            .collect();
        let square = Trajectory::new("sq", samples, 5).unwrap();
        assert!((square.arc_length(4) - 4.0).abs() < 1e-12);
        assert!((square.arc_length(99) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn association_cases() {
        let a = grid(30, 30.0, 0.0, 1);
        let same = associate(&a, &a, DEFAULT_MAX_DT).unwrap();
        assert_eq!(same.len(), 30);
        assert!(same.iter().all(|&(i, j)| i == j));

        let shifted = grid(30, 30.0, 0.004, 1);
        assert_eq!(associate(&a, &shifted, 0.01).unwrap().len(), 30);

        let far = grid(30, 30.0, 0.02, 1);
        assert!(matches!(
            associate(&a, &far, 0.01),
            Err(Error::Association { matched: 0 })
        ));
        assert!(associate(&a, &a, 0.0).is_err());
    }

    #[test]
    fn association_is_symmetric() {
        let a = grid(40, 30.0, 0.0, 1);
        let b = grid(25, 20.0, 0.003, 1);
        let ab = associate(&a, &b, 0.01).unwrap();
        let mut ba: Vec<_> = associate(&b, &a, 0.01)
            .unwrap()
            .into_iter()
            .map(|(j, i)| (i, j))
            .collect();
        ba.sort_unstable();
        assert_eq!(ab, ba);
        assert!(ab.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1));
    }

    #[test]
    fn facing_orientation_points_forward() {
        let q = orientation_facing(&Vector3::x(), &Vector3::y());
        let p = Pose::new(Vector3::zeros(), q);
        assert!((p.forward() - Vector3::x()).norm() < 1e-12);
        let down = orientation_facing(&-Vector3::y(), &Vector3::y());
        assert!((down * -Vector3::z() + Vector3::y()).norm() < 1e-12);
    }
}

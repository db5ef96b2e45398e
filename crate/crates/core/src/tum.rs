//! Text trajectory files: one `timestamp tx ty tz qx qy qz qw` record per
//! line, `#` comments.
//!
//! The writer records the frame stride in a `# frame_stride: N` comment so
//! that trajectories logged at different rates read back with the right
//! window arithmetic. Other tools simply skip it.

use std::fs;
use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};

use crate::error::{Error, Result};
use crate::trajectory::{Pose, Sample, Timestamp, Trajectory, DEFAULT_FRAME_STRIDE};

const HEADER: &str = "# timestamp tx ty tz qx qy qz qw";
const STRIDE_KEY: &str = "frame_stride:";
const UNIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrajectoryFormat {
    #[default]
    Tum,
}

pub fn parse_trajectory_file(path: impl AsRef<Path>, format: TrajectoryFormat) -> Result<Trajectory> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_trajectory_str(&text, &id, path, format)
}

/// Normalizes `q` unless it is already unit length, so written files
/// re-read bit for bit.
fn unit(q: Quaternion<f64>) -> UnitQuaternion<f64> {
    if (q.norm() - 1.0).abs() <= 1e-12 {
        UnitQuaternion::new_unchecked(q)
    } else {
        UnitQuaternion::from_quaternion(q)
    }
}

/// Parses trajectory text; `origin` only labels error messages.
pub fn parse_trajectory_str(
    text: &str,
    id: &str,
    origin: impl AsRef<Path>,
    format: TrajectoryFormat,
) -> Result<Trajectory> {
    let TrajectoryFormat::Tum = format;
    let origin = origin.as_ref();
    let parse_err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };

    let mut stride = DEFAULT_FRAME_STRIDE;
    let mut samples = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(value) = comment.trim().strip_prefix(STRIDE_KEY) {
                stride = value
                    .trim()
                    .parse()
                    .ok()
                    .filter(|&s: &usize| s > 0)
                    .ok_or_else(|| parse_err(line_no, format!("bad frame stride '{}'", value.trim())))?;
            }
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 8 {
            return Err(parse_err(line_no, format!("expected 8 fields, found {}", fields.len())));
        }
        let timestamp: Timestamp = fields[0].parse().map_err(|e| parse_err(line_no, e))?;
        let mut values = [0.0f64; 7];
        for (slot, field) in values.iter_mut().zip(&fields[1..]) {
            *slot = field
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| parse_err(line_no, format!("invalid number '{field}'")))?;
        }
        let [tx, ty, tz, qx, qy, qz, qw] = values;
        let q = Quaternion::new(qw, qx, qy, qz);
        if q.norm() < 1e-12 {
            return Err(parse_err(line_no, "zero-norm quaternion".into()));
        }
        samples.push(Sample {
            timestamp,
            pose: Pose::new(Vector3::new(tx, ty, tz), unit(q)),
        });
    }
    Trajectory::new(id, samples, stride)
}

/// Serializes a trajectory; rejects orientations that are not unit length.
pub fn format_trajectory(traj: &Trajectory) -> Result<String> {
    let mut out = String::with_capacity(64 * (traj.len() + 2));
    out.push_str(HEADER);
    out.push('\n');
    out.push_str(&format!("# {STRIDE_KEY} {}\n", traj.frame_stride()));
    for (i, s) in traj.samples().iter().enumerate() {
        let q = s.pose.orientation.quaternion();
        if (q.norm() - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::validation(format!(
                "sample {i} of '{}' has a non-unit quaternion (norm {})",
                traj.id(),
                q.norm()
            )));
        }
        let p = s.pose.position;
        out.push_str(&format!(
            "{} {} {} {} {} {} {} {}\n",
            s.timestamp, p.x, p.y, p.z, q.i, q.j, q.k, q.w
        ));
    }
    Ok(out)
}

pub fn write_trajectory_file(traj: &Trajectory, path: impl AsRef<Path>) -> Result<()> {
    let text = format_trajectory(traj)?;
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Unit;

    fn parse(text: &str) -> Result<Trajectory> {
        parse_trajectory_str(text, "t", "mem", TrajectoryFormat::Tum)
    }

    #[test]
    fn parses_records_and_comments() {
        let t = parse("# header\n0.0 0 0 0 0 0 0 1\n0.1 1 2 3 0 0 0 1\n").unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.frame_stride(), DEFAULT_FRAME_STRIDE);
        assert_eq!(t.samples()[0].pose.position, Vector3::zeros());
        assert_eq!(t.samples()[0].pose.orientation, UnitQuaternion::identity());
        assert_eq!(t.samples()[1].pose.position, Vector3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn normalizes_quaternions() {
        let t = parse("0.0 0 0 0 0 0 0 2\n").unwrap();
        let q = t.samples()[0].pose.orientation;
        assert!((q.quaternion().coords - Quaternion::new(1.0, 0.0, 0.0, 0.0).coords).norm() < 1e-15);
        assert!((q.quaternion().norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = parse("# c\n0.0 0 0 0 0 0 0 1\n0.1 0 0 zero 0 0 0 1\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse("0.0 1 2 3\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse("0.0 0 0 0 0 0 0 0\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn non_monotonic_is_validation_error() {
        let err = parse("0.2 0 0 0 0 0 0 1\n0.1 0 0 0 0 0 0 1\n").unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn stride_comment_round_trips() {
        let t = parse("# frame_stride: 1\n0.0 0 0 0 0 0 0 1\n").unwrap();
        assert_eq!(t.frame_stride(), 1);
        let back = parse(&format_trajectory(&t).unwrap()).unwrap();
        assert_eq!(back.frame_stride(), 1);
        assert!(parse("# frame_stride: 0\n").is_err());
    }

    #[test]
    fn empty_trajectory_writes_header_only() {
        let t = Trajectory::new("e", vec![], 5).unwrap();
        let text = format_trajectory(&t).unwrap();
        assert!(text.lines().all(|l| l.starts_with('#')));
        assert!(text.starts_with(HEADER));
        assert!(parse(&text).unwrap().is_empty());
    }

    #[test]
    fn non_unit_quaternion_rejected_on_write() {
        let q = Unit::new_unchecked(Quaternion::new(2.0, 0.0, 0.0, 0.0));
        let t = Trajectory::new(
            "bad",
            vec![Sample {
                timestamp: Timestamp::from_nanos(0),
                pose: Pose::new(Vector3::zeros(), q),
            }],
            5,
        )
        .unwrap();
        assert!(matches!(format_trajectory(&t), Err(Error::Validation(_))));
    }
}

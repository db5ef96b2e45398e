//! Closed-form least-squares similarity alignment of matched point sets
//! (Umeyama's method).

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::{Pose, Sample, Trajectory};

/// Relative singular value below which the cross-covariance is treated as
/// rank deficient.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
    pub scale: f64,
}

impl Default for SimilarityTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        SimilarityTransform {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
            scale: 1.0,
        }
    }

    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>, scale: f64) -> Result<Self> {
        if scale.is_nan() || scale <= 0.0 || !scale.is_finite() {
            return Err(Error::validation(format!("scale must be positive, got {scale}")));
        }
        Ok(SimilarityTransform {
            rotation,
            translation,
            scale,
        })
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.scale * (self.rotation * p) + self.translation
    }

    pub fn transform_pose(&self, pose: &Pose) -> Pose {
        Pose::new(self.transform_point(&pose.position), self.rotation * pose.orientation)
    }

    pub fn transform_trajectory(&self, traj: &Trajectory) -> Trajectory {
        let samples: Vec<Sample> = traj
            .samples()
            .iter()
            .map(|s| Sample {
                timestamp: s.timestamp,
                pose: self.transform_pose(&s.pose),
            })
            .collect();
        Trajectory::new(traj.id(), samples, traj.frame_stride())
            .expect("timestamps unchanged by a spatial transform")
    }

    pub fn inverse(&self) -> SimilarityTransform {
        let inv_rot = self.rotation.inverse();
        SimilarityTransform {
            rotation: inv_rot,
            translation: -(inv_rot * self.translation) / self.scale,
            scale: 1.0 / self.scale,
        }
    }

    /// Sum of squared distances `|ref_i - T(est_i)|^2`.
    pub fn residual(&self, reference: &[Vector3<f64>], estimate: &[Vector3<f64>]) -> f64 {
        reference
            .iter()
            .zip(estimate)
            .map(|(r, e)| (r - self.transform_point(e)).norm_squared())
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignMode {
    /// Rotation, translation and scale.
    #[default]
    Sim3,
    /// Rotation and translation.
    Se3,
    None,
}

impl std::str::FromStr for AlignMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sim3" => Ok(AlignMode::Sim3),
            "se3" => Ok(AlignMode::Se3),
            "none" => Ok(AlignMode::None),
            other => Err(Error::UnknownName {
                kind: "alignment mode",
                name: other.to_string(),
            }),
        }
    }
}

impl std::fmt::Display for AlignMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AlignMode::Sim3 => "sim3",
            AlignMode::Se3 => "se3",
            AlignMode::None => "none",
        })
    }
}

struct Solution {
    transform: SimilarityTransform,
    rank: usize,
}

fn solve(reference: &[Vector3<f64>], estimate: &[Vector3<f64>], with_scale: bool) -> Solution {
    let n = reference.len() as f64;
    let mean_ref = reference.iter().sum::<Vector3<f64>>() / n;
    let mean_est = estimate.iter().sum::<Vector3<f64>>() / n;

    let mut cov = Matrix3::zeros();
    let mut var_est = 0.0;
    for (r, e) in reference.iter().zip(estimate) {
        let dr = r - mean_ref;
        let de = e - mean_est;
        cov += dr * de.transpose();
        var_est += de.norm_squared();
    }
    cov /= n;
    var_est /= n;

    let svd = cov.svd(true, true);
    let (u, v_t) = (svd.u.expect("requested U"), svd.v_t.expect("requested V^T"));
    let sv = svd.singular_values;
    let largest = sv.max();
    let rank = if largest <= f64::MIN_POSITIVE {
        0
    } else {
        sv.iter().filter(|&&s| s > RANK_TOLERANCE * largest).count()
    };

    let mut sign = Matrix3::identity();
    if u.determinant() * v_t.determinant() < 0.0 {
        // flip the direction of the smallest singular value
        let (imin, _) = sv.argmin();
        sign[(imin, imin)] = -1.0;
    }
    let rot = Rotation3::from_matrix_unchecked(u * sign * v_t);
    let scale = if with_scale && var_est > 0.0 {
        (Matrix3::from_diagonal(&sv) * sign).trace() / var_est
    } else {
        1.0
    };
    let rotation = if rank == 0 {
        UnitQuaternion::identity()
    } else {
        UnitQuaternion::from_rotation_matrix(&rot)
    };
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let translation = mean_ref - scale * (rotation * mean_est);
    Solution {
        transform: SimilarityTransform {
            rotation,
            translation,
            scale,
        },
        rank,
    }
}

fn check_inputs(reference: &[Vector3<f64>], estimate: &[Vector3<f64>]) -> Result<()> {
    if reference.len() != estimate.len() {
        return Err(Error::LengthMismatch(format!(
            "{} reference points vs {} estimate points",
            reference.len(),
            estimate.len()
        )));
    }
    if reference.len() < 3 {
        return Err(Error::Alignment(format!(
            "need at least 3 point pairs, got {}",
            reference.len()
        )));
    }
    Ok(())
}

/// Transform minimizing `sum |ref_i - (s R est_i + t)|^2`; `with_scale = false`
/// fixes `s = 1`.
///
/// Fails on fewer than 3 pairs or when the cross-covariance has rank below 2,
/// where the rotation is not unique.
pub fn umeyama_align(
    reference: &[Vector3<f64>],
    estimate: &[Vector3<f64>],
    with_scale: bool,
) -> Result<SimilarityTransform> {
    check_inputs(reference, estimate)?;
    let sol = solve(reference, estimate, with_scale);
    if sol.rank < 2 {
        return Err(Error::Alignment(format!(
            "degenerate point configuration (covariance rank {})",
            sol.rank
        )));
    }
    Ok(sol.transform)
}

/// Like [`umeyama_align`] but accepts rank-deficient configurations, returning
/// one of the minimizers. Relative pose error only depends on the recovered
/// scale, which stays well defined for collinear paths.
pub(crate) fn umeyama_align_lenient(
    reference: &[Vector3<f64>],
    estimate: &[Vector3<f64>],
    with_scale: bool,
) -> Result<SimilarityTransform> {
    check_inputs(reference, estimate)?;
    Ok(solve(reference, estimate, with_scale).transform)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn cloud() -> Vec<Vector3<f64>> {
        vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.2, 0.0),
            Vector3::new(0.3, 1.1, 0.5),
            Vector3::new(-0.7, 0.4, 1.2),
            Vector3::new(0.5, -0.9, -0.3),
        ]
    }

    #[test]
    fn identity_on_equal_sets() {
        let pts = cloud();
        let t = umeyama_align(&pts, &pts, true).unwrap();
        assert!(t.rotation.angle() < 1e-12);
        assert!(t.translation.norm() < 1e-12);
        assert!((t.scale - 1.0).abs() < 1e-12);
        assert!(t.residual(&pts, &pts) < 1e-20);
    }

    #[test]
    fn recovers_known_similarity() {
        let truth = SimilarityTransform::new(
            UnitQuaternion::from_axis_angle(&Vector3::z_axis(), FRAC_PI_2),
            Vector3::new(1.0, 0.0, 0.0),
            2.0,
        )
        .unwrap();
        let reference = cloud();
        // est = truth(ref), so aligning est onto ref recovers the inverse.
        let estimate: Vec<_> = reference.iter().map(|p| truth.transform_point(p)).collect();
        let t = umeyama_align(&reference, &estimate, true).unwrap();
        let inv = truth.inverse();
        assert!((t.scale - inv.scale).abs() < 1e-9);
        assert!(t.rotation.angle_to(&inv.rotation) < 1e-9);
        assert!((t.translation - inv.translation).norm() < 1e-9);
    }

    #[test]
    fn rigid_mode_keeps_unit_scale() {
        let reference = cloud();
        let estimate: Vec<_> = reference.iter().map(|p| p * 3.0).collect();
        let t = umeyama_align(&reference, &estimate, false).unwrap();
        assert_eq!(t.scale, 1.0);
        assert!(t.rotation.angle() < 1e-9);
    }

    #[test]
    fn reflection_is_never_returned() {
        let reference = cloud();
        let estimate: Vec<_> = reference.iter().map(|p| Vector3::new(-p.x, p.y, p.z)).collect();
        let t = umeyama_align(&reference, &estimate, true).unwrap();
        let m = t.rotation.to_rotation_matrix();
        assert!((m.matrix().determinant() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_inputs_fail() {
        let pts = cloud();
        assert!(matches!(umeyama_align(&pts[..2], &pts[..2], true), Err(Error::Alignment(_))));
        let line: Vec<_> = (0..5).map(|i| Vector3::new(i as f64, 0.0, 0.0)).collect();
        assert!(matches!(umeyama_align(&line, &line, true), Err(Error::Alignment(_))));
        assert!(umeyama_align_lenient(&line, &line, true).is_ok());
        assert!(matches!(umeyama_align(&pts, &pts[..4], true), Err(Error::LengthMismatch(_))));
    }

    #[test]
    fn lenient_alignment_recovers_scale_on_a_line() {
        let line: Vec<_> = (0..5).map(|i| Vector3::new(i as f64, 0.0, 0.0)).collect();
        let scaled: Vec<_> = line.iter().map(|p| p * 0.5 + Vector3::new(0.0, 3.0, 0.0)).collect();
        let t = umeyama_align_lenient(&line, &scaled, true).unwrap();
        assert!((t.scale - 2.0).abs() < 1e-9);
        assert!(t.residual(&line, &scaled) < 1e-18);
    }
}

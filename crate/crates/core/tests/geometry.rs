use nalgebra::{Isometry3, Translation3, UnitQuaternion, Vector3};
use proptest::prelude::*;
use puk_core::align::{umeyama_align, AlignMode, SimilarityTransform};
use puk_core::rpe::relative_pose_error;
use puk_core::sim::{generate_ground_truth, generate_trial, DifficultyProfile, GtSpec, NoiseModel, PathShape};
use puk_core::trajectory::{Timestamp, Trajectory};
use puk_core::tum::{format_trajectory, parse_trajectory_file, parse_trajectory_str, write_trajectory_file, TrajectoryFormat};

fn rotation() -> impl Strategy<Value = UnitQuaternion<f64>> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, 0.0..std::f64::consts::PI).prop_filter_map("axis", |(x, y, z, a)| {
        let axis = Vector3::new(x, y, z);
        (axis.norm() > 0.1).then(|| UnitQuaternion::from_scaled_axis(axis.normalize() * a))
    })
}

fn cloud() -> impl Strategy<Value = Vec<Vector3<f64>>> {
    prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64), 4..40)
        .prop_map(|v| v.into_iter().map(|(x, y, z)| Vector3::new(x, y, z)).collect())
}

fn noisy_trial() -> (Trajectory, Trajectory) {
    let gt = generate_ground_truth(&GtSpec::for_windows(PathShape::FigureEight, 12, 10)).unwrap();
    let profile = DifficultyProfile::ramp(12).unwrap();
    let mut noise = NoiseModel::new(0.002, 0.02, 11);
    noise.rot_sigma = 0.002;
    let trial = generate_trial(&gt, &profile, &noise, 3).unwrap();
    (gt, trial)
}

proptest! {
    #[test]
    fn umeyama_recovers_similarity(points in cloud(), q in rotation(), s in 0.2..5.0f64,
                                   t in (-10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64)) {
        let truth = SimilarityTransform::new(q, Vector3::new(t.0, t.1, t.2), s).unwrap();
        let reference: Vec<_> = points.iter().map(|p| truth.transform_point(p)).collect();
        prop_assume!(umeyama_align(&reference, &points, true).is_ok());
        let est = umeyama_align(&reference, &points, true).unwrap();
        prop_assert!((est.scale - s).abs() < 1e-9);
        prop_assert!(est.rotation.angle_to(&q) < 1e-9);
        prop_assert!((est.translation - truth.translation).norm() < 1e-9);
    }

    /// No nearby similarity transform fits better than the closed form.
    #[test]
    fn umeyama_is_locally_optimal(reference in cloud(), seed in any::<u64>(),
                                  dq in rotation(), ds in -0.05..0.05f64,
                                  dt in (-0.05..0.05f64, -0.05..0.05f64, -0.05..0.05f64)) {
        let n = reference.len();
        let estimate: Vec<_> = (0..n)
            .map(|i| {
                let j = (seed as usize).wrapping_add(i * 7) % n;
                reference[j] * 0.7 + Vector3::new(i as f64 * 0.01, 0.0, 0.0)
            })
            .collect();
        let Ok(best) = umeyama_align(&reference, &estimate, true) else { return Ok(()) };
        let small = UnitQuaternion::from_scaled_axis(dq.scaled_axis() * 0.02);
        let nudged = SimilarityTransform::new(
            small * best.rotation,
            best.translation + Vector3::new(dt.0, dt.1, dt.2),
            best.scale * (1.0 + ds),
        ).unwrap();
        let r0 = best.residual(&reference, &estimate);
        prop_assert!(r0 <= nudged.residual(&reference, &estimate) + 1e-9 * (1.0 + r0));
    }

    #[test]
    fn rpe_is_rigid_invariant(q in rotation(), t in (-20.0..20.0f64, -20.0..20.0f64, -20.0..20.0f64)) {
        let (gt, trial) = noisy_trial();
        let iso = Isometry3::from_parts(Translation3::new(t.0, t.1, t.2), q);
        for mode in [AlignMode::Sim3, AlignMode::Se3] {
            let base = relative_pose_error(&gt, &trial, 10, mode).unwrap();
            let moved = relative_pose_error(&gt, &trial.transformed(&iso), 10, mode).unwrap();
            for (a, b) in base.values.iter().zip(&moved.values) {
                prop_assert!((a - b).abs() < 1e-9, "{a} vs {b}");
            }
        }
    }
}

/// Planar case: brute-force search over yaw with closed-form scale and
/// translation for each candidate.
#[test]
fn umeyama_matches_yaw_grid_search() {
    let points: Vec<Vector3<f64>> = (0..25)
        .map(|i| {
            let a = i as f64 * 0.37;
            Vector3::new(3.0 * a.cos() + 0.1 * i as f64, 2.0 * (1.3 * a).sin(), 0.0)
        })
        .collect();
    let yaw = 1.1;
    let reference: Vec<Vector3<f64>> = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let jitter = Vector3::new(((i * 13) % 7) as f64 * 0.01, ((i * 5) % 3) as f64 * 0.01, 0.0);
            UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw) * p * 1.5 + Vector3::new(2.0, -1.0, 0.0) + jitter
        })
        .collect();

    let fit = |theta: f64| -> f64 {
        let r = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), theta);
        let n = points.len() as f64;
        let mp = points.iter().sum::<Vector3<f64>>() / n;
        let mr = reference.iter().sum::<Vector3<f64>>() / n;
        let (mut num, mut den) = (0.0, 0.0);
        for (p, q) in points.iter().zip(&reference) {
            let rp = r * (p - mp);
            num += rp.dot(&(q - mr));
            den += rp.norm_squared();
        }
        let s = num / den;
        if s <= 0.0 {
            return f64::INFINITY;
        }
        points
            .iter()
            .zip(&reference)
            .map(|(p, q)| (q - mr - s * (r * (p - mp))).norm_squared())
            .sum()
    };
    let mut best = (f64::INFINITY, 0.0);
    for k in 0..36_000 {
        let theta = k as f64 * std::f64::consts::TAU / 36_000.0;
        let r = fit(theta);
        if r < best.0 {
            best = (r, theta);
        }
    }
    let est = umeyama_align(&reference, &points, true).unwrap();
    let axis_angle = est.rotation.scaled_axis();
    assert!(axis_angle.x.abs() < 1e-9 && axis_angle.y.abs() < 1e-9);
    assert!((axis_angle.z - best.1).abs() < 2e-4, "{} vs {}", axis_angle.z, best.1);
    assert!(est.residual(&reference, &points) <= best.0 + 1e-12);
}

#[test]
fn tum_round_trip_of_simulated_trial() {
    let (_, trial) = noisy_trial();
    let trial = Trajectory::new("trial", trial.samples()[..100].to_vec(), 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trial.tum");
    write_trajectory_file(&trial, &path).unwrap();
    let back = parse_trajectory_file(&path, TrajectoryFormat::Tum).unwrap();
    assert_eq!(back.id(), "trial");
    assert_eq!(back.len(), 100);
    for (a, b) in trial.samples().iter().zip(back.samples()) {
        assert_eq!(a.timestamp, b.timestamp);
        assert!((a.pose.position - b.pose.position).norm() < 1e-12);
        assert!(a.pose.orientation.angle_to(&b.pose.orientation) < 1e-12);
    }
    assert_eq!(format_trajectory(&back).unwrap(), std::fs::read_to_string(&path).unwrap());
}

#[test]
fn epoch_timestamps_keep_nanoseconds() {
    let text = "1403636579.763555584 0 0 0 0 0 0 1\n1403636579.813555456 0.1 0 0 0 0 0 1\n";
    let t = parse_trajectory_str(text, "euroc", "euroc.tum", TrajectoryFormat::Tum).unwrap();
    assert_eq!(t.samples()[0].timestamp, Timestamp::from_nanos(1_403_636_579_763_555_584));
    assert_eq!(t.samples()[1].timestamp.to_string(), "1403636579.813555456");
}

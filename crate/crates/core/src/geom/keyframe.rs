use super::{relative_angle, GeomError, Trajectory};

/// Slack on threshold comparisons so that motion accumulated in floating point
/// still triggers exactly at the threshold.
const THRESHOLD_SLACK: f64 = 1e-9;

/// Greedy distance/angle-triggered keyframing.
///
/// The first pose is always kept. A later pose is kept once its translation
/// distance (meters) or rotation angle (degrees) from the last kept pose
/// reaches the corresponding threshold.
pub fn select_keyframes(
    traj: &Trajectory,
    dist_thresh: f64,
    angle_thresh_deg: f64,
) -> Result<Trajectory, GeomError> {
    if !(dist_thresh > 0.0) || !(angle_thresh_deg > 0.0) {
        return Err(GeomError::InvalidParameter(format!(
            "keyframe thresholds must be positive (got {dist_thresh} m, {angle_thresh_deg} deg)"
        )));
    }
    let poses = traj.poses();
    if poses.is_empty() {
        return Ok(traj.clone());
    }
    let mut kept = vec![0usize];
    let mut last = poses[0];
    let mut last_rot = last.rotation_matrix();
    for (i, pose) in poses.iter().enumerate().skip(1) {
        let dist = (pose.translation - last.translation).norm();
        let rot = pose.rotation_matrix();
        let angle = relative_angle(&last_rot, &rot).to_degrees();
        if dist >= dist_thresh - THRESHOLD_SLACK || angle >= angle_thresh_deg - THRESHOLD_SLACK {
            kept.push(i);
            last = *pose;
            last_rot = rot;
        }
    }
    Ok(traj.select(&kept))
}

/// Evenly strided subsequence with stride `ceil(N / max_count)`, starting at
/// the first pose. The result never exceeds `max_count` poses.
pub fn subsample_uniform(traj: &Trajectory, max_count: usize) -> Result<Trajectory, GeomError> {
    if max_count == 0 {
        return Err(GeomError::InvalidParameter("max_count must be at least 1".into()));
    }
    Ok(traj.select(&subsample_indices(traj.len(), max_count)))
}

pub(crate) fn subsample_indices(len: usize, max_count: usize) -> Vec<usize> {
    if len <= max_count {
        return (0..len).collect();
    }
    let stride = len.div_ceil(max_count);
    (0..len).step_by(stride).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Pose;
    use nalgebra::{UnitQuaternion, Vector3};

    fn line(n: usize, step: f64) -> Trajectory {
        let pts: Vec<_> = (0..n).map(|i| Vector3::new(i as f64 * step, 0.0, 0.0)).collect();
        Trajectory::from_translations(&pts)
    }

    #[test]
    fn single_pose_is_kept() {
        let t = line(1, 1.0);
        assert_eq!(select_keyframes(&t, 0.5, 10.0).unwrap(), t);
    }

    #[test]
    fn every_fifth_pose_on_forward_motion() {
        let t = line(21, 0.1);
        let k = select_keyframes(&t, 0.5, f64::INFINITY).unwrap();
        let xs: Vec<f64> = k.translations().iter().map(|p| p.x).collect();
        assert_eq!(k.len(), 5);
        for (j, x) in xs.iter().enumerate() {
            assert!((x - 0.5 * j as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn accumulated_steps_still_trigger() {
        // Positions built by repeated addition drift below the exact multiples.
        let mut x = 0.0;
        let mut pts = Vec::new();
        for _ in 0..11 {
            pts.push(Vector3::new(x, 0.0, 0.0));
            x += 0.1;
        }
        let k = select_keyframes(&Trajectory::from_translations(&pts), 0.5, f64::INFINITY).unwrap();
        assert_eq!(k.len(), 3);
    }

    #[test]
    fn every_third_pose_on_yaw() {
        let poses: Vec<Pose> = (0..10)
            .map(|i| {
                Pose::new(
                    UnitQuaternion::from_euler_angles(0.0, 0.0, (5.0 * i as f64).to_radians()),
                    Vector3::zeros(),
                )
            })
            .collect();
        let t = Trajectory::from_poses(poses).unwrap();
        let k = select_keyframes(&t, 1.0, 15.0).unwrap();
        let expected = t.select(&[0, 3, 6, 9]);
        assert_eq!(k, expected);
    }

    #[test]
    fn keyframing_is_idempotent() {
        let t = line(50, 0.13);
        let once = select_keyframes(&t, 0.5, 30.0).unwrap();
        assert_eq!(select_keyframes(&once, 0.5, 30.0).unwrap(), once);
    }

    #[test]
    fn subsample_cases() {
        assert_eq!(subsample_uniform(&line(100, 1.0), 500).unwrap().len(), 100);
        let s = subsample_uniform(&line(1000, 1.0), 500).unwrap();
        assert_eq!(s.len(), 500);
        assert_eq!(s.poses()[1].translation.x, 2.0);
        assert_eq!(subsample_indices(7, 3), vec![0, 3, 6]);
        assert!(subsample_uniform(&line(3, 1.0), 0).is_err());
    }
}

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::{GeomError, Pose, Similarity3, Trajectory};

/// Singular-value ratio below which the cross-covariance is treated as rank one.
const RANK_TOLERANCE: f64 = 1e-10;

/// Result of a closed-form trajectory alignment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    /// Transform mapping predicted positions onto ground truth.
    pub transform: Similarity3,
    /// Set when the predicted positions are collinear, so the rotation about
    /// their common line is not determined by the data.
    pub rank_deficient: bool,
}

/// Rigid (scale fixed to 1) least-squares alignment of `pred` onto `gt`.
pub fn align_se3(pred: &Trajectory, gt: &Trajectory) -> Result<Alignment, GeomError> {
    let (src, dst) = correspondences(pred, gt)?;
    umeyama(&src, &dst, false)
}

/// Similarity least-squares alignment of `pred` onto `gt`, scale estimated.
pub fn align_sim3(pred: &Trajectory, gt: &Trajectory) -> Result<Alignment, GeomError> {
    let (src, dst) = correspondences(pred, gt)?;
    umeyama(&src, &dst, true)
}

/// Maps every pose of `traj` through `xform`; rotations are left-composed.
pub fn apply_alignment(xform: &Similarity3, traj: &Trajectory) -> Trajectory {
    let rot = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(xform.rotation));
    let poses = traj
        .poses()
        .iter()
        .map(|p| Pose {
            rotation: rot * p.rotation,
            translation: xform.transform_point(&p.translation),
            timestamp: p.timestamp,
        })
        .collect();
    traj.with_poses(poses)
}

/// Root-mean-square translation residual of `pred` mapped through `xform` against `gt`.
pub fn alignment_rmse(xform: &Similarity3, pred: &Trajectory, gt: &Trajectory) -> Result<f64, GeomError> {
    let (src, dst) = correspondences(pred, gt)?;
    let sum: f64 = src
        .iter()
        .zip(&dst)
        .map(|(s, d)| (xform.transform_point(s) - d).norm_squared())
        .sum();
    Ok((sum / src.len() as f64).sqrt())
}

type PointPairs = (Vec<Vector3<f64>>, Vec<Vector3<f64>>);

fn correspondences(pred: &Trajectory, gt: &Trajectory) -> Result<PointPairs, GeomError> {
    if pred.len() != gt.len() {
        return Err(GeomError::LengthMismatch { pred: pred.len(), gt: gt.len() });
    }
    if pred.len() < 2 {
        return Err(GeomError::TooFewPoses { required: 2, got: pred.len() });
    }
    Ok((pred.translations(), gt.translations()))
}

fn mean(points: &[Vector3<f64>]) -> Vector3<f64> {
    points.iter().sum::<Vector3<f64>>() / points.len() as f64
}

/// Umeyama's closed form with reflection correction.
pub(crate) fn umeyama(
    src: &[Vector3<f64>],
    dst: &[Vector3<f64>],
    with_scale: bool,
) -> Result<Alignment, GeomError> {
    let n = src.len() as f64;
    let mu_src = mean(src);
    let mu_dst = mean(dst);

    let src_spread = src.iter().map(|p| (p - mu_src).norm()).fold(0.0, f64::max);
    if src_spread <= 1e-12 * (1.0 + mu_src.norm()) {
        return Err(GeomError::Degenerate("all predicted positions coincide".into()));
    }
    let var_src = src.iter().map(|p| (p - mu_src).norm_squared()).sum::<f64>() / n;

    let mut cov = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        cov += (d - mu_dst) * (s - mu_src).transpose();
    }
    cov /= n;

    let svd = cov.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(GeomError::Degenerate("SVD did not converge".into())),
    };
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma = order.map(|i| svd.singular_values[i]);

    if sigma[0] <= f64::MIN_POSITIVE {
        return Err(GeomError::Degenerate("ground-truth positions coincide".into()));
    }

    let rank_deficient = sigma[1] <= RANK_TOLERANCE * sigma[0];
    let (rotation, trace_ds) = if rank_deficient {
        // Collinear data: take the smallest rotation carrying the source line
        // direction onto the matched destination direction.
        let v1: Vector3<f64> = v_t.row(order[0]).transpose();
        let u1: Vector3<f64> = u.column(order[0]).into_owned();
        log::warn!("alignment is rank deficient (collinear positions); rotation about the line is arbitrary");
        (minimal_rotation(&v1, &u1), sigma[0])
    } else {
        let sign = if u.determinant() * v_t.determinant() < 0.0 { -1.0 } else { 1.0 };
        let mut d = Vector3::new(1.0, 1.0, 1.0);
        // Flip the direction belonging to the smallest singular value.
        d[order[2]] = sign;
        let r = u * Matrix3::from_diagonal(&d) * v_t;
        let trace: f64 = (0..3).map(|i| svd.singular_values[i] * d[i]).sum();
        (r, trace)
    };

    let scale = if with_scale { trace_ds / var_src } else { 1.0 };
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(GeomError::Degenerate(format!("estimated scale {scale} is not positive")));
    }
    let translation = mu_dst - scale * (rotation * mu_src);
    Ok(Alignment {
        transform: Similarity3 { scale, rotation, translation },
        rank_deficient,
    })
}

fn minimal_rotation(from: &Vector3<f64>, to: &Vector3<f64>) -> Matrix3<f64> {
    match UnitQuaternion::rotation_between(from, to) {
        Some(q) => *q.to_rotation_matrix().matrix(),
        None => {
            // Antiparallel: half-turn about any axis perpendicular to `from`.
            let helper = if from.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
            let axis = nalgebra::Unit::new_normalize(from.cross(&helper));
            *UnitQuaternion::from_axis_angle(&axis, std::f64::consts::PI)
                .to_rotation_matrix()
                .matrix()
        }
    }
}

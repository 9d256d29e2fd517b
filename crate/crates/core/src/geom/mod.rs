//! Pose algebra, trajectories and closed-form alignment.

mod align;
mod keyframe;

pub use align::{align_se3, align_sim3, alignment_rmse, apply_alignment, Alignment};
pub use keyframe::{select_keyframes, subsample_uniform};

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Orthonormality tolerance for rotations handed to the pose types.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("trajectory length mismatch: pred has {pred} poses, gt has {gt}")]
    LengthMismatch { pred: usize, gt: usize },
    #[error("need at least {required} poses, got {got}")]
    TooFewPoses { required: usize, got: usize },
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    #[error("timestamps must be strictly increasing (index {index}: {prev} then {next})")]
    NonMonotonicTimestamps { index: usize, prev: f64, next: f64 },
    #[error("invalid rotation: {0}")]
    InvalidRotation(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// A camera-to-world rigid pose.
///
/// The rotation is stored as a unit quaternion; the matrix form is derived on demand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
    pub timestamp: Option<f64>,
}

impl Pose {
    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self { rotation, translation, timestamp: None }
    }

    pub fn identity() -> Self {
        Self::new(UnitQuaternion::identity(), Vector3::zeros())
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self::new(UnitQuaternion::identity(), translation)
    }

    pub fn with_timestamp(mut self, timestamp: f64) -> Self {
        self.timestamp = Some(timestamp);
        self
    }

    /// Builds a pose from a rotation matrix, rejecting matrices that are not
    /// proper rotations within [`ROTATION_TOLERANCE`].
    pub fn from_matrix(rotation: &Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeomError> {
        check_rotation(rotation)?;
        let rot = Rotation3::from_matrix_unchecked(*rotation);
        Ok(Self::new(UnitQuaternion::from_rotation_matrix(&rot), translation))
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        *self.rotation.to_rotation_matrix().matrix()
    }

    /// Maps a world point into this camera's frame.
    pub fn world_to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation_matrix().transpose() * (p - self.translation)
    }
}

/// Checks that `m` is orthonormal with determinant +1.
pub fn check_rotation(m: &Matrix3<f64>) -> Result<(), GeomError> {
    let err = (m.transpose() * m - Matrix3::identity()).abs().max();
    if !err.is_finite() || err > ROTATION_TOLERANCE {
        return Err(GeomError::InvalidRotation(format!("orthonormality error {err:e}")));
    }
    let det = m.determinant();
    if (det - 1.0).abs() > ROTATION_TOLERANCE {
        return Err(GeomError::InvalidRotation(format!("determinant {det}")));
    }
    Ok(())
}

/// Rotation angle of `m` in radians, in `[0, pi]`.
///
/// Equivalent to `acos((tr(m) - 1) / 2)` but evaluated as an `atan2` of the
/// skew and symmetric parts, which stays accurate for angles near zero.
pub fn rotation_angle(m: &Matrix3<f64>) -> f64 {
    let cos = ((m.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    let skew = Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]);
    let sin = (skew.norm() / 2.0).min(1.0);
    sin.atan2(cos)
}

/// Angle in radians between the rotations `a` and `b`, i.e. the angle of `a^T b`.
pub fn relative_angle(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    rotation_angle(&(a.transpose() * b))
}

/// Unsigned angle in radians between two non-zero vectors.
pub fn vector_angle(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

/// A time-ordered sequence of poses in one world frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    poses: Vec<Pose>,
    pub frame_id: String,
}

impl Trajectory {
    /// Validates that timestamps, where present, strictly increase.
    pub fn new(poses: Vec<Pose>, frame_id: impl Into<String>) -> Result<Self, GeomError> {
        for (i, w) in poses.windows(2).enumerate() {
            if let (Some(prev), Some(next)) = (w[0].timestamp, w[1].timestamp) {
                if next <= prev {
                    return Err(GeomError::NonMonotonicTimestamps { index: i + 1, prev, next });
                }
            }
        }
        Ok(Self { poses, frame_id: frame_id.into() })
    }

    /// Trajectory in the default `world` frame.
    pub fn from_poses(poses: Vec<Pose>) -> Result<Self, GeomError> {
        Self::new(poses, "world")
    }

    /// Untimed trajectory made of identity-rotation poses at the given positions.
    pub fn from_translations(points: &[Vector3<f64>]) -> Self {
        let poses = points.iter().map(|p| Pose::from_translation(*p)).collect();
        Self { poses, frame_id: "world".into() }
    }

    pub fn poses(&self) -> &[Pose] {
        &self.poses
    }

    pub fn into_poses(self) -> Vec<Pose> {
        self.poses
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn translations(&self) -> Vec<Vector3<f64>> {
        self.poses.iter().map(|p| p.translation).collect()
    }

    pub fn rotation_matrices(&self) -> Vec<Matrix3<f64>> {
        self.poses.iter().map(Pose::rotation_matrix).collect()
    }

    /// Subsequence at the given (increasing) indices; keeps the frame id.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            poses: indices.iter().map(|&i| self.poses[i]).collect(),
            frame_id: self.frame_id.clone(),
        }
    }

    pub(crate) fn with_poses(&self, poses: Vec<Pose>) -> Self {
        Self { poses, frame_id: self.frame_id.clone() }
    }
}

/// A similarity transform `x -> s * R * x + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Similarity3 {
    pub scale: f64,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Similarity3 {
    pub fn identity() -> Self {
        Self { scale: 1.0, rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    pub fn new(scale: f64, rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeomError> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(GeomError::InvalidParameter(format!("scale must be positive, got {scale}")));
        }
        check_rotation(&rotation)?;
        Ok(Self { scale, rotation, translation })
    }

    /// Rigid transform (scale 1).
    pub fn rigid(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeomError> {
        Self::new(1.0, rotation, translation)
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.scale * (self.rotation * p) + self.translation
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            scale: 1.0 / self.scale,
            rotation: rt,
            translation: -(rt * self.translation) / self.scale,
        }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Similarity3) -> Self {
        Self {
            scale: self.scale * other.scale,
            rotation: self.rotation * other.rotation,
            translation: self.scale * (self.rotation * other.translation) + self.translation,
        }
    }

    pub fn is_rigid(&self) -> bool {
        self.scale == 1.0
    }
}

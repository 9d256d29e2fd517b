use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{GaussianSet, GsError};
use crate::geom::Pose;

/// Points closer than this along the optical axis are culled (meters).
pub const NEAR_PLANE: f64 = 0.01;

/// Pinhole intrinsics in pixels. Pixel `(i, j)` covers `[i, i+1) x [j, j+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self, GsError> {
        let k = Self { fx, fy, cx, cy, width, height };
        k.validate()?;
        Ok(k)
    }

    /// Square pixels with the principal point at the image center.
    pub fn from_fov(fov_deg: f64, width: usize, height: usize) -> Result<Self, GsError> {
        if !(fov_deg > 0.0 && fov_deg < 180.0) {
            return Err(GsError::InvalidParameter(format!("field of view {fov_deg} outside (0, 180)")));
        }
        let f = width as f64 / 2.0 / (fov_deg.to_radians() / 2.0).tan();
        Self::new(f, f, width as f64 / 2.0, height as f64 / 2.0, width, height)
    }

    pub fn validate(&self) -> Result<(), GsError> {
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return Err(GsError::InvalidParameter("focal lengths must be positive".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(GsError::InvalidParameter("image size must be positive".into()));
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64 && self.cy >= 0.0 && self.cy < self.height as f64) {
            return Err(GsError::InvalidParameter("principal point outside the image".into()));
        }
        Ok(())
    }
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        Self::from_fov(120.0, 800, 800).expect("default intrinsics are valid")
    }
}

/// Row-major depth image (meters along the optical axis); `sentinel` marks pixels without data.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    sentinel: f32,
    data: Vec<f32>,
}

impl DepthMap {
    pub fn from_raw(width: usize, height: usize, sentinel: f32, data: Vec<f32>) -> Result<Self, GsError> {
        if data.len() != width * height {
            return Err(GsError::InvalidDepth(format!("{} values for {width}x{height}", data.len())));
        }
        if let Some(v) = data.iter().find(|&&v| v != sentinel && !(v > 0.0 && v.is_finite())) {
            return Err(GsError::InvalidDepth(format!("depth {v} is neither positive nor the sentinel")));
        }
        Ok(Self { width, height, sentinel, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn sentinel(&self) -> f32 {
        self.sentinel
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> Option<f32> {
        let v = self.data[y * self.width + x];
        (v != self.sentinel).then_some(v)
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|&&v| v != self.sentinel).count()
    }
}

/// Projects every Gaussian center into the camera at `pose` (camera-to-world)
/// and splats a disc of `splat_radius` pixels, keeping the nearest depth per pixel.
pub fn render_depth(gaussians: &GaussianSet, pose: &Pose, k: &CameraIntrinsics, splat_radius: u32) -> DepthMap {
    let (w, h) = (k.width as i64, k.height as i64);
    let r = splat_radius as i64;
    let offsets: Vec<(i64, i64)> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
        .filter(|(dx, dy)| dx * dx + dy * dy <= r * r)
        .collect();
    let rt = pose.rotation_matrix().transpose();
    let mut zbuf = vec![f64::INFINITY; k.width * k.height];
    for c in gaussians.centers() {
        let pc = rt * (c - pose.translation);
        if pc.z <= NEAR_PLANE {
            continue;
        }
        let u = k.fx * pc.x / pc.z + k.cx;
        let v = k.fy * pc.y / pc.z + k.cy;
        if !(u.is_finite() && v.is_finite()) {
            continue;
        }
        let (pu, pv) = (u.floor(), v.floor());
        if pu < -(r as f64) || pv < -(r as f64) || pu >= (w + r) as f64 || pv >= (h + r) as f64 {
            continue;
        }
        let (pu, pv) = (pu as i64, pv as i64);
        for &(dx, dy) in &offsets {
            let (x, y) = (pu + dx, pv + dy);
            if x < 0 || y < 0 || x >= w || y >= h {
                continue;
            }
            let slot = &mut zbuf[(y * w + x) as usize];
            if pc.z < *slot {
                *slot = pc.z;
            }
        }
    }
    let data = zbuf.into_iter().map(|z| if z.is_finite() { z as f32 } else { 0.0 }).collect();
    DepthMap { width: k.width, height: k.height, sentinel: 0.0, data }
}

/// One depth map per pose, rendered in parallel.
pub fn render_depths(gaussians: &GaussianSet, poses: &[Pose], k: &CameraIntrinsics, splat_radius: u32) -> Vec<DepthMap> {
    poses.par_iter().map(|p| render_depth(gaussians, p, k, splat_radius)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Quaternion, UnitQuaternion, Vector3};

    fn set(centers: Vec<Vector3<f64>>) -> GaussianSet {
        let n = centers.len();
        GaussianSet::new(centers, vec![0.1; n], vec![0.5; n], vec![[0.0; 3]; n]).unwrap()
    }

    fn small_k() -> CameraIntrinsics {
        CameraIntrinsics::new(50.0, 50.0, 32.0, 24.0, 64, 48).unwrap()
    }

    #[test]
    fn principal_pixel_depth() {
        let d = render_depth(&set(vec![Vector3::new(0.0, 0.0, 5.0)]), &Pose::identity(), &small_k(), 0);
        assert_eq!(d.get(32, 24), Some(5.0));
        assert_eq!(d.valid_count(), 1);
    }

    #[test]
    fn z_buffer_keeps_nearest() {
        let g = set(vec![Vector3::new(0.0, 0.0, 5.0), Vector3::new(0.0, 0.0, 3.0)]);
        let d = render_depth(&g, &Pose::identity(), &small_k(), 1);
        assert_eq!(d.get(32, 24), Some(3.0));
        assert_eq!(d.valid_count(), 5);
    }

    #[test]
    fn behind_camera_is_empty() {
        let d = render_depth(&set(vec![Vector3::new(0.0, 0.0, -5.0)]), &Pose::identity(), &small_k(), 3);
        assert_eq!(d.valid_count(), 0);
        let near = render_depth(&set(vec![Vector3::new(0.0, 0.0, 0.01)]), &Pose::identity(), &small_k(), 0);
        assert_eq!(near.valid_count(), 0);
    }

    #[test]
    fn exact_rigid_motion_is_bit_identical() {
        let g = set((0..40).map(|i| Vector3::new((i % 5) as f64 * 0.25 - 0.5, (i / 5) as f64 * 0.125 - 0.5, 2.0 + (i % 3) as f64)).collect());
        let cam = Pose::new(UnitQuaternion::identity(), Vector3::new(0.125, -0.25, 0.0));
        let base = render_depth(&g, &cam, &small_k(), 1);
        // Half-turn about z plus a dyadic shift: all arithmetic stays exact.
        let flip = UnitQuaternion::new_unchecked(Quaternion::new(0.0, 0.0, 0.0, 1.0));
        let shift = Vector3::new(3.5, -1.25, 0.75);
        let moved_g = g.map_centers(|c| flip * c + shift);
        let moved_cam = Pose::new(flip * cam.rotation, flip * cam.translation + shift);
        assert_eq!(render_depth(&moved_g, &moved_cam, &small_k(), 1), base);
    }

    #[test]
    fn fov_intrinsics() {
        let k = CameraIntrinsics::default();
        assert_eq!((k.width, k.height, k.cx), (800, 800, 400.0));
        assert!((k.fx - 400.0 / 3f64.sqrt()).abs() < 1e-9);
        assert!(CameraIntrinsics::new(1.0, 1.0, 10.0, 0.0, 10, 10).is_err());
    }
}

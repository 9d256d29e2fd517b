//! Gaussian-splat initialization from point clouds and depth-target rendering.

mod kdtree;
mod render;

pub use kdtree::KdTree;
pub use render::{render_depth, render_depths, CameraIntrinsics, DepthMap, NEAR_PLANE};

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::recon::PointCloud;

/// Upper bound on initial opacity.
pub const MAX_OPACITY: f64 = 0.99;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GsError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid Gaussian set: {0}")]
    InvalidSet(String),
    #[error("cloud has {points} points; need more than k = {k}")]
    TooFewPoints { points: usize, k: usize },
    #[error("invalid depth map: {0}")]
    InvalidDepth(String),
}

/// Isotropic Gaussians: center, scale (meters), opacity and RGB color in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSet {
    centers: Vec<Vector3<f64>>,
    scales: Vec<f64>,
    opacities: Vec<f64>,
    colors: Vec<[f64; 3]>,
}

impl GaussianSet {
    pub fn new(
        centers: Vec<Vector3<f64>>,
        scales: Vec<f64>,
        opacities: Vec<f64>,
        colors: Vec<[f64; 3]>,
    ) -> Result<Self, GsError> {
        let n = centers.len();
        if scales.len() != n || opacities.len() != n || colors.len() != n {
            return Err(GsError::InvalidSet(format!(
                "lengths differ: {n} centers, {} scales, {} opacities, {} colors",
                scales.len(),
                opacities.len(),
                colors.len()
            )));
        }
        if let Some(i) = centers.iter().position(|c| !c.iter().all(|v| v.is_finite())) {
            return Err(GsError::InvalidSet(format!("center {i} is not finite")));
        }
        if let Some(i) = scales.iter().position(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(GsError::InvalidSet(format!("scale {i} = {} is not positive", scales[i])));
        }
        if let Some(i) = opacities.iter().position(|o| !(*o > 0.0 && *o <= MAX_OPACITY)) {
            return Err(GsError::InvalidSet(format!("opacity {i} = {} outside (0, {MAX_OPACITY}]", opacities[i])));
        }
        if let Some(i) = colors.iter().position(|c| !c.iter().all(|v| (0.0..=1.0).contains(v))) {
            return Err(GsError::InvalidSet(format!("color {i} outside [0, 1]")));
        }
        Ok(Self { centers, scales, opacities, colors })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn centers(&self) -> &[Vector3<f64>] {
        &self.centers
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn opacities(&self) -> &[f64] {
        &self.opacities
    }

    pub fn colors(&self) -> &[[f64; 3]] {
        &self.colors
    }

    /// Same Gaussians with every center mapped through `f`.
    pub fn map_centers(&self, f: impl Fn(&Vector3<f64>) -> Vector3<f64>) -> Self {
        Self { centers: self.centers.iter().map(f).collect(), ..self.clone() }
    }
}

/// Uniform random subsample without replacement, in original order.
pub fn downsample_cloud(cloud: &PointCloud, target_count: usize, seed: u64) -> Result<PointCloud, GsError> {
    if target_count == 0 {
        return Err(GsError::InvalidParameter("target_count must be at least 1".into()));
    }
    if cloud.len() <= target_count {
        return Ok(cloud.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, cloud.len(), target_count).into_vec();
    idx.sort_unstable();
    Ok(cloud.select(&idx))
}

/// `scale_multiplier` times the mean distance from each point to its `k` nearest
/// other points (exact search).
pub fn knn_scales(points: &[Vector3<f64>], k: usize, scale_multiplier: f64) -> Result<Vec<f64>, GsError> {
    if k == 0 {
        return Err(GsError::InvalidParameter("k must be at least 1".into()));
    }
    if !(scale_multiplier >= 0.0 && scale_multiplier.is_finite()) {
        return Err(GsError::InvalidParameter(format!("scale_multiplier {scale_multiplier} is invalid")));
    }
    if points.len() <= k {
        return Err(GsError::TooFewPoints { points: points.len(), k });
    }
    let tree = KdTree::new(points);
    Ok(points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let d = tree.nearest_dist2(p, k, i);
            scale_multiplier * d.iter().map(|d2| d2.sqrt()).sum::<f64>() / k as f64
        })
        .collect())
}

/// Median; the mean of the two middle values for even counts.
fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Opacity inversely proportional to Gaussian volume, normalized so the median
/// scale gets `max_opacity`: `min(max, max * (s_med / s)^3)`.
pub fn opacity_from_density(scales: &[f64], max_opacity: f64) -> Result<Vec<f64>, GsError> {
    if !(max_opacity > 0.0 && max_opacity < 1.0) {
        return Err(GsError::InvalidParameter(format!("max_opacity {max_opacity} outside (0, 1)")));
    }
    if let Some(s) = scales.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
        return Err(GsError::InvalidParameter(format!("scale {s} is not positive")));
    }
    if scales.is_empty() {
        return Ok(Vec::new());
    }
    let med = median(scales);
    Ok(scales.iter().map(|s| max_opacity.min(max_opacity * (med / s).powi(3))).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GsInitParams {
    pub target_count: usize,
    pub seed: u64,
    pub k: usize,
    pub scale_multiplier: f64,
    pub max_opacity: f64,
}

impl Default for GsInitParams {
    fn default() -> Self {
        Self { target_count: 5_000_000, seed: 0, k: 3, scale_multiplier: 1.0, max_opacity: MAX_OPACITY }
    }
}

/// Downsample, then set scales from k-NN distances and opacities from scale.
/// Uncolored clouds get mid-gray Gaussians.
pub fn init_gaussians(cloud: &PointCloud, params: &GsInitParams) -> Result<GaussianSet, GsError> {
    let sub = downsample_cloud(cloud, params.target_count, params.seed)?;
    let scales = knn_scales(&sub.points, params.k, params.scale_multiplier)?;
    let opacities = opacity_from_density(&scales, params.max_opacity)?;
    let colors = match &sub.colors {
        Some(c) => c.iter().map(|c| c.map(|v| v as f64 / 255.0)).collect(),
        None => vec![[0.5; 3]; sub.len()],
    };
    GaussianSet::new(sub.points, scales, opacities, colors)
}

//! Collision-mesh extraction from metric point clouds.
//!
//! The pipeline is [`voxelize`] → [`marching_cubes`] → [`crop_by_trajectory`]
//! → [`filter_small_components`].

mod clean;
mod marching_cubes;
mod mc_tables;

pub use clean::{components, crop_by_trajectory, filter_small_components, weld_vertices, WELD_TOLERANCE};
pub use marching_cubes::{box_smooth, marching_cubes};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Trajectory;
use crate::io::ply::ExtraProperty;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReconError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("invalid point cloud: {0}")]
    InvalidCloud(String),
    #[error("trajectory is empty")]
    EmptyTrajectory,
}

/// Metric XYZ points with optional 8-bit colors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vector3<f64>>,
    pub colors: Option<Vec<[u8; 3]>>,
    /// Per-vertex PLY properties this crate does not interpret, carried through on rewrite.
    pub extra: Vec<ExtraProperty>,
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>, colors: Option<Vec<[u8; 3]>>) -> Result<Self, ReconError> {
        let cloud = Self { points, colors, extra: Vec::new() };
        cloud.validate()?;
        Ok(cloud)
    }

    pub fn from_points(points: Vec<Vector3<f64>>) -> Self {
        Self { points, colors: None, extra: Vec::new() }
    }

    pub fn validate(&self) -> Result<(), ReconError> {
        if let Some(c) = &self.colors {
            if c.len() != self.points.len() {
                return Err(ReconError::InvalidCloud(format!(
                    "{} colors for {} points",
                    c.len(),
                    self.points.len()
                )));
            }
        }
        if let Some(i) = self.points.iter().position(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(ReconError::InvalidCloud(format!("point {i} is not finite")));
        }
        for e in &self.extra {
            if e.values.len() != self.points.len() {
                return Err(ReconError::InvalidCloud(format!("property '{}' has the wrong length", e.name)));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Subset of points (and their colors/extra properties) at `indices`.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            colors: self.colors.as_ref().map(|c| indices.iter().map(|&i| c[i]).collect()),
            extra: self
                .extra
                .iter()
                .map(|e| ExtraProperty {
                    name: e.name.clone(),
                    kind: e.kind,
                    values: indices.iter().map(|&i| e.values[i]).collect(),
                })
                .collect(),
        }
    }
}

/// Dense occupancy grid. Cell `(i, j, k)` spans
/// `origin + [i, i+1) * voxel_size` along x (likewise y, z); storage is x-fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGrid {
    pub origin: Vector3<f64>,
    pub voxel_size: f64,
    pub dims: [usize; 3],
    pub occupied: Vec<bool>,
}

impl OccupancyGrid {
    pub fn empty(origin: Vector3<f64>, voxel_size: f64, dims: [usize; 3]) -> Self {
        Self { origin, voxel_size, dims, occupied: vec![false; dims[0] * dims[1] * dims[2]] }
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        self.occupied[self.index(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, value: bool) {
        let idx = self.index(i, j, k);
        self.occupied[idx] = value;
    }

    pub fn cell_center(&self, i: usize, j: usize, k: usize) -> Vector3<f64> {
        self.origin + Vector3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * self.voxel_size
    }

    /// Cell containing `p`, if inside the grid.
    pub fn cell_of(&self, p: &Vector3<f64>) -> Option<[usize; 3]> {
        let rel = (p - self.origin) / self.voxel_size;
        let mut out = [0usize; 3];
        for a in 0..3 {
            let c = rel[a].floor();
            if c < 0.0 || c >= self.dims[a] as f64 {
                return None;
            }
            out[a] = c as usize;
        }
        Some(out)
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.iter().filter(|&&o| o).count()
    }
}

/// Marks cells holding at least `min_points_per_voxel` points. The grid spans
/// the cloud's bounding box padded by one empty voxel on every side.
pub fn voxelize(
    cloud: &PointCloud,
    voxel_size: f64,
    min_points_per_voxel: usize,
) -> Result<OccupancyGrid, ReconError> {
    if !(voxel_size > 0.0 && voxel_size.is_finite()) {
        return Err(ReconError::InvalidParameter(format!("voxel_size must be positive, got {voxel_size}")));
    }
    if min_points_per_voxel == 0 {
        return Err(ReconError::InvalidParameter("min_points_per_voxel must be at least 1".into()));
    }
    if cloud.is_empty() {
        return Ok(OccupancyGrid::empty(Vector3::zeros(), voxel_size, [1, 1, 1]));
    }
    // Integer cell keys avoid re-deriving cells from a rounded origin.
    let key = |p: &Vector3<f64>| p.map(|v| (v / voxel_size).floor() as i64);
    let mut lo = key(&cloud.points[0]);
    let mut hi = lo;
    for p in &cloud.points {
        let k = key(p);
        lo = lo.inf(&k);
        hi = hi.sup(&k);
    }
    let origin = (lo - Vector3::repeat(1)).map(|v| v as f64 * voxel_size);
    let mut dims = [0usize; 3];
    for a in 0..3 {
        dims[a] = (hi[a] - lo[a]) as usize + 3;
    }
    let mut counts = vec![0u32; dims[0] * dims[1] * dims[2]];
    let mut grid = OccupancyGrid::empty(origin, voxel_size, dims);
    for p in &cloud.points {
        let c = key(p) - lo + Vector3::repeat(1);
        let idx = grid.index(c[0] as usize, c[1] as usize, c[2] as usize);
        counts[idx] = counts[idx].saturating_add(1);
    }
    for (cell, &n) in grid.occupied.iter_mut().zip(&counts) {
        *cell = n as usize >= min_points_per_voxel;
    }
    Ok(grid)
}

/// Indexed triangle mesh.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TriangleMesh {
    pub vertices: Vec<Vector3<f64>>,
    pub triangles: Vec<[usize; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vector3<f64>>, triangles: Vec<[usize; 3]>) -> Result<Self, ReconError> {
        let mesh = Self { vertices, triangles };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<(), ReconError> {
        let n = self.vertices.len();
        for (f, t) in self.triangles.iter().enumerate() {
            if t.iter().any(|&v| v >= n) {
                return Err(ReconError::InvalidMesh(format!("face {f} references a vertex out of range")));
            }
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(ReconError::InvalidMesh(format!("face {f} repeats a vertex index")));
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn face_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn centroid(&self, face: usize) -> Vector3<f64> {
        let [a, b, c] = self.triangles[face];
        (self.vertices[a] + self.vertices[b] + self.vertices[c]) / 3.0
    }

    /// Unnormalized face normal (right-handed winding).
    pub fn face_normal(&self, face: usize) -> Vector3<f64> {
        let [a, b, c] = self.triangles[face];
        (self.vertices[b] - self.vertices[a]).cross(&(self.vertices[c] - self.vertices[a]))
    }

    /// Keeps the faces for which `keep` is true and drops unreferenced vertices,
    /// preserving the relative order of both.
    pub fn retain_faces(&self, keep: impl Fn(usize) -> bool) -> TriangleMesh {
        let mut remap = vec![usize::MAX; self.vertices.len()];
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for (f, tri) in self.triangles.iter().enumerate() {
            if !keep(f) {
                continue;
            }
            let mut out = [0usize; 3];
            for (slot, &v) in out.iter_mut().zip(tri) {
                if remap[v] == usize::MAX {
                    remap[v] = vertices.len();
                    vertices.push(self.vertices[v]);
                }
                *slot = remap[v];
            }
            triangles.push(out);
        }
        TriangleMesh { vertices, triangles }
    }
}

/// Tunables of [`extract_collision_mesh`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractParams {
    pub voxel_size: f64,
    pub min_points_per_voxel: usize,
    pub iso: f64,
    /// Box-filter the occupancy field before extraction.
    pub smooth: bool,
    pub crop_radius: f64,
    /// Faces above the lowest camera by more than this are cut, meters.
    pub height_cut: f64,
    pub min_component_faces: usize,
}

impl Default for ExtractParams {
    fn default() -> Self {
        Self {
            voxel_size: 0.10,
            min_points_per_voxel: 2,
            iso: 0.5,
            smooth: false,
            crop_radius: 30.0,
            height_cut: 3.0,
            min_component_faces: 50,
        }
    }
}

/// Voxelize, extract the iso-surface, crop around the cameras, then drop small fragments.
pub fn extract_collision_mesh(
    cloud: &PointCloud,
    traj: &Trajectory,
    params: &ExtractParams,
) -> Result<TriangleMesh, ReconError> {
    cloud.validate()?;
    let grid = voxelize(cloud, params.voxel_size, params.min_points_per_voxel)?;
    let mesh = marching_cubes(&grid, params.iso, params.smooth)?;
    let cropped = crop_by_trajectory(&mesh, traj, params.crop_radius, params.height_cut)?;
    Ok(filter_small_components(&cropped, params.min_component_faces))
}

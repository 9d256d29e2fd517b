use std::collections::HashMap;

use nalgebra::Vector3;

use super::{ReconError, TriangleMesh};
use crate::geom::Trajectory;

/// Vertices closer than this (per axis, after quantization) are treated as one.
pub const WELD_TOLERANCE: f64 = 1e-6;

fn quantize(p: &Vector3<f64>, tol: f64) -> [i64; 3] {
    [(p.x / tol).round() as i64, (p.y / tol).round() as i64, (p.z / tol).round() as i64]
}

/// Merges vertices that quantize to the same `tol`-sized cell. The first vertex
/// of each cell is kept; faces that collapse are dropped.
pub fn weld_vertices(mesh: &TriangleMesh, tol: f64) -> TriangleMesh {
    let mut cell_to_vertex: HashMap<[i64; 3], usize> = HashMap::new();
    let mut vertices = Vec::new();
    let remap: Vec<usize> = mesh
        .vertices
        .iter()
        .map(|p| {
            *cell_to_vertex.entry(quantize(p, tol)).or_insert_with(|| {
                vertices.push(*p);
                vertices.len() - 1
            })
        })
        .collect();
    let triangles = mesh
        .triangles
        .iter()
        .map(|t| [remap[t[0]], remap[t[1]], remap[t[2]]])
        .filter(|t| t[0] != t[1] && t[1] != t[2] && t[0] != t[2])
        .collect();
    TriangleMesh { vertices, triangles }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Smaller root wins so labels are order-stable.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Component id per face, with faces connected through shared vertices after
/// welding coincident positions. Ids are dense and numbered by first face.
pub fn components(mesh: &TriangleMesh) -> Vec<usize> {
    let mut cell_to_vertex: HashMap<[i64; 3], usize> = HashMap::new();
    let welded: Vec<usize> = mesh
        .vertices
        .iter()
        .enumerate()
        .map(|(i, p)| *cell_to_vertex.entry(quantize(p, WELD_TOLERANCE)).or_insert(i))
        .collect();
    let mut uf = UnionFind::new(mesh.vertices.len());
    for t in &mesh.triangles {
        uf.union(welded[t[0]], welded[t[1]]);
        uf.union(welded[t[0]], welded[t[2]]);
    }
    let mut label: HashMap<usize, usize> = HashMap::new();
    mesh.triangles
        .iter()
        .map(|t| {
            let root = uf.find(welded[t[0]]);
            let next = label.len();
            *label.entry(root).or_insert(next)
        })
        .collect()
}

/// Removes connected components with fewer than `min_faces` faces.
pub fn filter_small_components(mesh: &TriangleMesh, min_faces: usize) -> TriangleMesh {
    if min_faces == 0 {
        return mesh.clone();
    }
    let comp = components(mesh);
    let n_comp = comp.iter().copied().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; n_comp];
    for &c in &comp {
        sizes[c] += 1;
    }
    mesh.retain_faces(|f| sizes[comp[f]] >= min_faces)
}

/// Keeps faces whose centroid lies within `radius` (3D, inclusive) of some camera
/// position and no higher than the lowest camera plus `height_cut` (z up).
pub fn crop_by_trajectory(
    mesh: &TriangleMesh,
    traj: &Trajectory,
    radius: f64,
    height_cut: f64,
) -> Result<TriangleMesh, ReconError> {
    if traj.is_empty() {
        return Err(ReconError::EmptyTrajectory);
    }
    if !(radius > 0.0) {
        return Err(ReconError::InvalidParameter(format!("radius must be positive, got {radius}")));
    }
    let cams = traj.translations();
    let z_limit = cams.iter().map(|c| c.z).fold(f64::INFINITY, f64::min) + height_cut;
    let index = (radius.is_finite()).then(|| CameraHash::new(&cams, radius));
    Ok(mesh.retain_faces(|f| {
        let c = mesh.centroid(f);
        if c.z > z_limit {
            return false;
        }
        match &index {
            Some(h) => h.any_within(&cams, &c, radius),
            None => true,
        }
    }))
}

/// Uniform hash of camera positions with cell size equal to the query radius.
struct CameraHash {
    cell: f64,
    buckets: HashMap<[i64; 3], Vec<usize>>,
}

impl CameraHash {
    fn new(cams: &[Vector3<f64>], cell: f64) -> Self {
        let mut buckets: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        for (i, c) in cams.iter().enumerate() {
            buckets.entry(Self::key(c, cell)).or_default().push(i);
        }
        Self { cell, buckets }
    }

    fn key(p: &Vector3<f64>, cell: f64) -> [i64; 3] {
        [(p.x / cell).floor() as i64, (p.y / cell).floor() as i64, (p.z / cell).floor() as i64]
    }

    fn any_within(&self, cams: &[Vector3<f64>], p: &Vector3<f64>, radius: f64) -> bool {
        let k = Self::key(p, self.cell);
        for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    if let Some(ids) = self.buckets.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        if ids.iter().any(|&i| (cams[i] - p).norm() <= radius) {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }
}

//! Navigation meshes: baking from a collision mesh, snapping, shortest paths and
//! start/goal sampling.

mod bvh;
mod file;
mod path;
mod sample;

pub use bvh::closest_point_on_triangle;
pub use file::{load_navmesh, save_navmesh, NavMeshFile, NAVMESH_FORMAT_VERSION};
pub use path::Path;
pub use sample::DEFAULT_SAMPLING_BUDGET;

use std::collections::HashMap;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Trajectory;
use crate::recon::{TriangleMesh, WELD_TOLERANCE};
use bvh::Bvh;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NavError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("navmesh is empty: {0}")]
    Empty(String),
    #[error("endpoint is {distance:.3} m from the navmesh (cap {cap} m)")]
    InvalidEndpoint { distance: f64, cap: f64 },
    #[error("goal is unreachable from start (regions {start_region} and {goal_region})")]
    Unreachable { start_region: usize, goal_region: usize },
    #[error("no valid start/goal pair after {attempts} attempts")]
    SamplingFailed { attempts: usize },
    #[error("invalid navmesh: {0}")]
    Invalid(String),
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NavParams {
    /// Largest walkable incline, degrees from `up_axis`.
    pub max_slope_deg: f64,
    /// Connected walkable regions with fewer faces are discarded.
    pub min_region_faces: usize,
    /// Clearance kept from boundary vertices when paths turn around them, meters.
    pub agent_radius: f64,
    /// Endpoints farther than this from the navmesh are rejected, meters.
    pub snap_cap: f64,
    pub up_axis: [f64; 3],
}

impl Default for NavParams {
    fn default() -> Self {
        Self { max_slope_deg: 35.0, min_region_faces: 20, agent_radius: 0.2, snap_cap: 2.0, up_axis: [0.0, 0.0, 1.0] }
    }
}

impl NavParams {
    pub fn validate(&self) -> Result<(), NavError> {
        if !(self.max_slope_deg > 0.0 && self.max_slope_deg < 90.0) {
            return Err(NavError::InvalidParameter(format!("max_slope_deg {} outside (0, 90)", self.max_slope_deg)));
        }
        if !(self.agent_radius >= 0.0 && self.agent_radius.is_finite()) {
            return Err(NavError::InvalidParameter("agent_radius must be non-negative".into()));
        }
        if !(self.snap_cap >= 0.0) {
            return Err(NavError::InvalidParameter("snap_cap must be non-negative".into()));
        }
        let up = Vector3::from(self.up_axis);
        if !(up.norm() > 0.0 && up.iter().all(|v| v.is_finite())) {
            return Err(NavError::InvalidParameter("up_axis must be a non-zero vector".into()));
        }
        Ok(())
    }
}

/// What lies across a navmesh triangle edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    /// Another walkable triangle.
    Portal,
    /// Non-walkable geometry (walls, steep slopes).
    Wall,
    /// Nothing: the edge of the scanned scene.
    Open,
}

/// A point on the navmesh surface and the triangle holding it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub point: Vector3<f64>,
    pub triangle: usize,
    /// Distance from the query point that was snapped.
    pub distance: f64,
}

/// Walkable triangles with edge adjacency. Triangle edge `e` joins corners `e` and `(e + 1) % 3`.
#[derive(Debug, Clone)]
pub struct NavMesh {
    params: NavParams,
    up: Vector3<f64>,
    e1: Vector3<f64>,
    e2: Vector3<f64>,
    vertices: Vec<Vector3<f64>>,
    triangles: Vec<[usize; 3]>,
    source_faces: Vec<usize>,
    neighbors: Vec<[Option<usize>; 3]>,
    edge_kinds: Vec<[EdgeKind; 3]>,
    regions: Vec<usize>,
    region_count: usize,
    boundary_vertex: Vec<bool>,
    bvh: Bvh,
}

type EdgeKey = (usize, usize);

fn edge_key(a: usize, b: usize) -> EdgeKey {
    (a.min(b), a.max(b))
}

/// Source-mesh vertex welding plus per-face welded corner ids (`None` for faces that collapse).
fn weld(mesh: &TriangleMesh) -> (Vec<Vector3<f64>>, Vec<Option<[usize; 3]>>) {
    let mut cells: HashMap<[i64; 3], usize> = HashMap::new();
    let mut vertices = Vec::new();
    let remap: Vec<usize> = mesh
        .vertices
        .iter()
        .map(|p| {
            let key = [
                (p.x / WELD_TOLERANCE).round() as i64,
                (p.y / WELD_TOLERANCE).round() as i64,
                (p.z / WELD_TOLERANCE).round() as i64,
            ];
            *cells.entry(key).or_insert_with(|| {
                vertices.push(*p);
                vertices.len() - 1
            })
        })
        .collect();
    let faces = mesh
        .triangles
        .iter()
        .map(|t| {
            let w = [remap[t[0]], remap[t[1]], remap[t[2]]];
            (w[0] != w[1] && w[1] != w[2] && w[0] != w[2]).then_some(w)
        })
        .collect();
    (vertices, faces)
}

fn face_normal(v: &[Vector3<f64>], t: &[usize; 3]) -> Vector3<f64> {
    (v[t[1]] - v[t[0]]).cross(&(v[t[2]] - v[t[0]]))
}

/// Union of faces sharing a portal edge; returns a component id per listed face.
fn portal_components(faces: &[[usize; 3]]) -> Vec<usize> {
    let mut by_edge: HashMap<EdgeKey, Vec<usize>> = HashMap::new();
    for (f, t) in faces.iter().enumerate() {
        for e in 0..3 {
            by_edge.entry(edge_key(t[e], t[(e + 1) % 3])).or_default().push(f);
        }
    }
    let mut comp = vec![usize::MAX; faces.len()];
    let mut next = 0;
    for seed in 0..faces.len() {
        if comp[seed] != usize::MAX {
            continue;
        }
        comp[seed] = next;
        let mut stack = vec![seed];
        while let Some(f) = stack.pop() {
            let t = faces[f];
            for e in 0..3 {
                let shared = &by_edge[&edge_key(t[e], t[(e + 1) % 3])];
                if shared.len() == 2 {
                    let g = if shared[0] == f { shared[1] } else { shared[0] };
                    if comp[g] == usize::MAX {
                        comp[g] = next;
                        stack.push(g);
                    }
                }
            }
        }
        next += 1;
    }
    comp
}

impl NavMesh {
    /// Marks faces whose normal is within `max_slope_deg` of up as walkable and
    /// drops walkable regions smaller than `min_region_faces`.
    pub fn bake(mesh: &TriangleMesh, params: &NavParams) -> Result<Self, NavError> {
        params.validate()?;
        mesh.validate().map_err(|e| NavError::Invalid(e.to_string()))?;
        let up = Vector3::from(params.up_axis).normalize();
        let cos_max = params.max_slope_deg.to_radians().cos();
        let (vertices, welded) = weld(mesh);
        let mut walkable: Vec<usize> = Vec::new();
        for (f, t) in welded.iter().enumerate() {
            if let Some(t) = t {
                let n = face_normal(&vertices, t);
                let len = n.norm();
                if len > 0.0 && n.dot(&up) / len >= cos_max {
                    walkable.push(f);
                }
            }
        }
        let tris: Vec<[usize; 3]> = walkable.iter().map(|&f| welded[f].expect("walkable faces are welded")).collect();
        let comp = portal_components(&tris);
        let mut sizes: HashMap<usize, usize> = HashMap::new();
        for &c in &comp {
            *sizes.entry(c).or_default() += 1;
        }
        let kept: Vec<usize> = walkable
            .iter()
            .zip(&comp)
            .filter(|(_, c)| sizes[c] >= params.min_region_faces)
            .map(|(&f, _)| f)
            .collect();
        if kept.is_empty() {
            return Err(NavError::Empty(format!(
                "{} walkable faces, none in a region of at least {} faces",
                walkable.len(),
                params.min_region_faces
            )));
        }
        Self::from_faces(mesh, &kept, params)
    }

    /// Builds a navmesh from an explicit list of source-face indices.
    pub fn from_faces(mesh: &TriangleMesh, faces: &[usize], params: &NavParams) -> Result<Self, NavError> {
        params.validate()?;
        if faces.is_empty() {
            return Err(NavError::Empty("no faces".into()));
        }
        let (welded_vertices, welded) = weld(mesh);
        let mut selected = vec![false; welded.len()];
        let mut tris_welded = Vec::with_capacity(faces.len());
        for &f in faces {
            let t = welded
                .get(f)
                .ok_or_else(|| NavError::Invalid(format!("face {f} is not in the source mesh")))?
                .ok_or_else(|| NavError::Invalid(format!("face {f} is degenerate")))?;
            if std::mem::replace(&mut selected[f], true) {
                return Err(NavError::Invalid(format!("face {f} listed twice")));
            }
            tris_welded.push(t);
        }
        // Which source faces touch each edge: (selected, other).
        let mut edge_faces: HashMap<EdgeKey, (Vec<usize>, usize)> = HashMap::new();
        for (i, t) in tris_welded.iter().enumerate() {
            for e in 0..3 {
                edge_faces.entry(edge_key(t[e], t[(e + 1) % 3])).or_default().0.push(i);
            }
        }
        for (f, t) in welded.iter().enumerate() {
            if let (Some(t), false) = (t, selected[f]) {
                for e in 0..3 {
                    if let Some(entry) = edge_faces.get_mut(&edge_key(t[e], t[(e + 1) % 3])) {
                        entry.1 += 1;
                    }
                }
            }
        }
        // Compact vertices in first-use order.
        let mut remap = vec![usize::MAX; welded_vertices.len()];
        let mut vertices = Vec::new();
        let triangles: Vec<[usize; 3]> = tris_welded
            .iter()
            .map(|t| {
                t.map(|v| {
                    if remap[v] == usize::MAX {
                        remap[v] = vertices.len();
                        vertices.push(welded_vertices[v]);
                    }
                    remap[v]
                })
            })
            .collect();
        let mut neighbors = vec![[None; 3]; triangles.len()];
        let mut edge_kinds = vec![[EdgeKind::Open; 3]; triangles.len()];
        let mut boundary_vertex = vec![false; vertices.len()];
        for (i, t) in tris_welded.iter().enumerate() {
            for e in 0..3 {
                let (own, others) = &edge_faces[&edge_key(t[e], t[(e + 1) % 3])];
                let kind = if own.len() == 2 && *others == 0 {
                    neighbors[i][e] = Some(if own[0] == i { own[1] } else { own[0] });
                    EdgeKind::Portal
                } else if own.len() == 1 && *others == 0 {
                    EdgeKind::Open
                } else {
                    EdgeKind::Wall
                };
                edge_kinds[i][e] = kind;
                if kind != EdgeKind::Portal {
                    boundary_vertex[triangles[i][e]] = true;
                    boundary_vertex[triangles[i][(e + 1) % 3]] = true;
                }
            }
        }
        let up = Vector3::from(params.up_axis).normalize();
        let pick = if up.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        let e1 = (pick - up * pick.dot(&up)).normalize();
        let e2 = up.cross(&e1);
        let regions = portal_components(&triangles);
        let region_count = regions.iter().copied().max().map_or(0, |m| m + 1);
        let bvh = Bvh::build(&vertices, &triangles);
        Ok(Self {
            params: params.clone(),
            up,
            e1,
            e2,
            vertices,
            triangles,
            source_faces: faces.to_vec(),
            neighbors,
            edge_kinds,
            regions,
            region_count,
            boundary_vertex,
            bvh,
        })
    }

    pub fn params(&self) -> &NavParams {
        &self.params
    }

    pub fn up(&self) -> Vector3<f64> {
        self.up
    }

    pub fn vertices(&self) -> &[Vector3<f64>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Source-mesh face index of each navmesh triangle.
    pub fn source_faces(&self) -> &[usize] {
        &self.source_faces
    }

    pub fn neighbors(&self) -> &[[Option<usize>; 3]] {
        &self.neighbors
    }

    pub fn edge_kinds(&self) -> &[[EdgeKind; 3]] {
        &self.edge_kinds
    }

    pub fn region(&self, triangle: usize) -> usize {
        self.regions[triangle]
    }

    pub fn region_count(&self) -> usize {
        self.region_count
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    /// Coordinates in the plane perpendicular to up.
    pub fn project(&self, p: &Vector3<f64>) -> Vector2<f64> {
        Vector2::new(p.dot(&self.e1), p.dot(&self.e2))
    }

    /// Horizontal unit direction for a heading angle (radians, counter-clockwise about up).
    pub fn heading_direction(&self, heading: f64) -> Vector3<f64> {
        self.e1 * heading.cos() + self.e2 * heading.sin()
    }

    /// Heading angle of the horizontal component of `v`.
    pub fn heading_of(&self, v: &Vector3<f64>) -> f64 {
        v.dot(&self.e2).atan2(v.dot(&self.e1))
    }

    pub fn triangle_points(&self, t: usize) -> [Vector3<f64>; 3] {
        self.triangles[t].map(|v| self.vertices[v])
    }

    /// Closest surface point; ties go to the lowest triangle id.
    pub fn snap(&self, p: &Vector3<f64>) -> SurfacePoint {
        let (triangle, point, d2) = self
            .bvh
            .nearest(p, &self.vertices, &self.triangles)
            .expect("navmesh has at least one triangle");
        SurfacePoint { point, triangle, distance: d2.sqrt() }
    }

    /// [`snap`](Self::snap), rejecting points beyond the snap cap.
    pub fn snap_endpoint(&self, p: &Vector3<f64>) -> Result<SurfacePoint, NavError> {
        let s = self.snap(p);
        if s.distance > self.params.snap_cap {
            return Err(NavError::InvalidEndpoint { distance: s.distance, cap: self.params.snap_cap });
        }
        Ok(s)
    }

    /// Shortest walkable path between two points (snapped first).
    pub fn shortest_path(&self, start: &Vector3<f64>, goal: &Vector3<f64>) -> Result<Path, NavError> {
        let s = self.snap_endpoint(start)?;
        let g = self.snap_endpoint(goal)?;
        self.path_between(&s, &g)
    }

    pub fn path_between(&self, start: &SurfacePoint, goal: &SurfacePoint) -> Result<Path, NavError> {
        path::plan(self, start, goal)
    }

    pub fn geodesic_distance(&self, a: &Vector3<f64>, b: &Vector3<f64>) -> Result<f64, NavError> {
        Ok(self.shortest_path(a, b)?.length)
    }

    /// Draws a start/goal pair near camera positions (see the sampling module docs).
    pub fn sample_endpoints(
        &self,
        cameras: &Trajectory,
        vicinity: f64,
        min_geodesic: f64,
        seed: u64,
    ) -> Result<(SurfacePoint, SurfacePoint), NavError> {
        sample::sample_endpoints(self, cameras, vicinity, min_geodesic, seed, DEFAULT_SAMPLING_BUDGET)
    }

    /// Barycentric lift of a projected point into triangle `t`, clamped to the triangle.
    pub fn lift(&self, t: usize, q: &Vector2<f64>) -> Vector3<f64> {
        let [a, b, c] = self.triangle_points(t);
        let (pa, pb, pc) = (self.project(&a), self.project(&b), self.project(&c));
        let det = (pb - pa).perp(&(pc - pa));
        if det.abs() < f64::MIN_POSITIVE {
            return a;
        }
        let mut u = (q - pa).perp(&(pc - pa)) / det;
        let mut v = (pb - pa).perp(&(q - pa)) / det;
        u = u.clamp(0.0, 1.0);
        v = v.clamp(0.0, 1.0 - u);
        a + (b - a) * u + (c - a) * v
    }
}

pub fn bake_navmesh(mesh: &TriangleMesh, max_slope_deg: f64, min_region_faces: usize) -> Result<NavMesh, NavError> {
    NavMesh::bake(mesh, &NavParams { max_slope_deg, min_region_faces, ..NavParams::default() })
}

#[cfg(test)]
pub(crate) mod test_meshes {
    use super::*;

    /// Grid of `nx x ny` squares of size `cell`, split along one diagonal, at height `z`,
    /// skipping squares for which `hole(i, j)` is true.
    pub fn grid(nx: usize, ny: usize, cell: f64, z: f64, hole: impl Fn(usize, usize) -> bool) -> TriangleMesh {
        let mut vertices = Vec::new();
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push(Vector3::new(i as f64 * cell, j as f64 * cell, z));
            }
        }
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut triangles = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                if hole(i, j) {
                    continue;
                }
                triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        TriangleMesh { vertices, triangles }.retain_faces(|_| true)
    }

    pub fn append(a: &TriangleMesh, b: &TriangleMesh) -> TriangleMesh {
        let mut m = a.clone();
        let off = m.vertices.len();
        m.vertices.extend(&b.vertices);
        m.triangles.extend(b.triangles.iter().map(|t| t.map(|v| v + off)));
        m
    }
}

#[cfg(test)]
mod tests {
    use super::test_meshes::*;
    use super::*;

    fn params(min_region_faces: usize) -> NavParams {
        NavParams { min_region_faces, agent_radius: 0.0, ..NavParams::default() }
    }

    #[test]
    fn flat_floor_is_one_region() {
        let nav = NavMesh::bake(&grid(10, 10, 1.0, 0.0, |_, _| false), &NavParams { max_slope_deg: 45.0, ..params(1) })
            .unwrap();
        assert_eq!(nav.len(), 200);
        assert_eq!(nav.region_count(), 1);
        for (t, n) in nav.neighbors().iter().enumerate() {
            for (e, nb) in n.iter().enumerate() {
                if let Some(nb) = nb {
                    assert!(nav.neighbors()[*nb].contains(&Some(t)));
                } else {
                    assert_eq!(nav.edge_kinds()[t][e], EdgeKind::Open);
                }
            }
        }
    }

    #[test]
    fn walls_are_not_walkable_and_mark_edges() {
        let floor = grid(4, 4, 1.0, 0.0, |_, _| false);
        // Vertical wall along y = 0 sharing the floor's boundary vertices.
        let wall = TriangleMesh {
            vertices: vec![
                Vector3::new(0.0, 0.0, 0.0),
                Vector3::new(1.0, 0.0, 0.0),
                Vector3::new(1.0, 0.0, 1.0),
                Vector3::new(0.0, 0.0, 1.0),
            ],
            triangles: vec![[0, 2, 1], [0, 3, 2]],
        };
        let nav = NavMesh::bake(&append(&floor, &wall), &NavParams { max_slope_deg: 89.0, ..params(1) }).unwrap();
        assert_eq!(nav.len(), 32);
        let walls = nav.edge_kinds().iter().flatten().filter(|k| **k == EdgeKind::Wall).count();
        assert_eq!(walls, 1);
    }

    #[test]
    fn small_ledge_dropped() {
        let floor = grid(5, 5, 1.0, 0.0, |_, _| false);
        let mut ledge = grid(2, 1, 1.0, 5.0, |_, _| false);
        ledge.triangles.remove(2);
        let m = append(&floor, &ledge);
        let with = NavMesh::bake(&m, &params(1)).unwrap();
        assert_eq!(with.region_count(), 2);
        let nav = NavMesh::bake(&m, &params(10)).unwrap();
        assert_eq!(nav.region_count(), 1);
        assert_eq!(nav.len(), 50);
        assert!(matches!(NavMesh::bake(&m, &params(1000)), Err(NavError::Empty(_))));
    }

    #[test]
    fn snap_examples() {
        let nav = NavMesh::bake(&grid(2, 2, 1.0, 0.0, |_, _| false), &params(1)).unwrap();
        let on = nav.snap(&Vector3::new(0.3, 0.2, 0.0));
        assert_eq!((on.point, on.distance), (Vector3::new(0.3, 0.2, 0.0), 0.0));
        let above = nav.snap(&Vector3::new(1.3, 0.2, 1.0));
        assert!((above.point - Vector3::new(1.3, 0.2, 0.0)).norm() < 1e-15);
        assert_eq!(above.distance, 1.0);
        // On the shared diagonal of the first square: both triangles are at distance 0.
        let tie = nav.snap(&Vector3::new(0.5, 0.5, 0.0));
        assert_eq!(tie.triangle, 0);
        assert!(nav.snap_endpoint(&Vector3::new(0.5, 0.5, 3.0)).is_err());
    }

    #[test]
    fn lift_round_trips() {
        let mut m = grid(1, 1, 1.0, 0.0, |_, _| false);
        m.vertices[2].z = 0.5;
        let nav = NavMesh::bake(&m, &params(1)).unwrap();
        let p = nav.lift(0, &Vector2::new(0.75, 0.25));
        assert!((p - Vector3::new(0.75, 0.25, 0.125)).norm() < 1e-12);
    }
}

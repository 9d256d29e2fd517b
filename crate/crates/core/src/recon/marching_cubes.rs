use std::collections::HashMap;

use nalgebra::Vector3;

use super::mc_tables::{CORNERS, EDGE_CORNERS, TRIANGLES};
use super::{OccupancyGrid, ReconError, TriangleMesh};

/// Scalar field of the grid: 1.0 for occupied cells, 0.0 otherwise.
fn binary_field(grid: &OccupancyGrid) -> Vec<f64> {
    grid.occupied.iter().map(|&o| if o { 1.0 } else { 0.0 }).collect()
}

/// 3x3x3 box average of the occupancy field. Cells outside the grid count as empty.
pub fn box_smooth(grid: &OccupancyGrid) -> Vec<f64> {
    let [nx, ny, nz] = grid.dims;
    let field = binary_field(grid);
    let mut out = vec![0.0; field.len()];
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let mut sum = 0.0;
                for dk in -1i64..=1 {
                    for dj in -1i64..=1 {
                        for di in -1i64..=1 {
                            let (a, b, c) = (i as i64 + di, j as i64 + dj, k as i64 + dk);
                            if a < 0 || b < 0 || c < 0 || a >= nx as i64 || b >= ny as i64 || c >= nz as i64 {
                                continue;
                            }
                            sum += field[grid.index(a as usize, b as usize, c as usize)];
                        }
                    }
                }
                out[grid.index(i, j, k)] = sum / 27.0;
            }
        }
    }
    out
}

/// Extracts the `iso` level set of the occupancy field, sampled at voxel centers.
///
/// Vertices shared between neighboring cubes are emitted once, in z, y, x cube
/// order. Faces are wound so that normals point from occupied toward empty
/// space. With `smooth` set, the field is box-filtered first (see [`box_smooth`]).
pub fn marching_cubes(grid: &OccupancyGrid, iso: f64, smooth: bool) -> Result<TriangleMesh, ReconError> {
    if !(iso > 0.0 && iso < 1.0) {
        return Err(ReconError::InvalidParameter(format!("iso must lie in (0, 1), got {iso}")));
    }
    let field = if smooth { box_smooth(grid) } else { binary_field(grid) };
    let [nx, ny, nz] = grid.dims;
    let mut mesh = TriangleMesh::default();
    if nx < 2 || ny < 2 || nz < 2 {
        return Ok(mesh);
    }
    // Key: lower sample index of the edge and its axis.
    let mut edge_vertex: HashMap<(usize, u8), usize> = HashMap::new();

    for k in 0..nz - 1 {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let mut values = [0.0; 8];
                let mut case = 0usize;
                for (c, off) in CORNERS.iter().enumerate() {
                    values[c] = field[grid.index(i + off[0], j + off[1], k + off[2])];
                    if values[c] < iso {
                        case |= 1 << c;
                    }
                }
                if case == 0 || case == 255 {
                    continue;
                }
                let row = &TRIANGLES[case];
                for tri in row.chunks(3).take_while(|t| t[0] >= 0) {
                    let mut ids = [0usize; 3];
                    for (slot, &e) in ids.iter_mut().zip(tri) {
                        let [ca, cb] = EDGE_CORNERS[e as usize];
                        let (oa, ob) = (CORNERS[ca], CORNERS[cb]);
                        let axis = (0..3).find(|&a| oa[a] != ob[a]).expect("edge spans one axis") as u8;
                        let lo = if oa[axis as usize] < ob[axis as usize] { oa } else { ob };
                        let key = (grid.index(i + lo[0], j + lo[1], k + lo[2]), axis);
                        *slot = *edge_vertex.entry(key).or_insert_with(|| {
                            let pa = grid.cell_center(i + oa[0], j + oa[1], k + oa[2]);
                            let pb = grid.cell_center(i + ob[0], j + ob[1], k + ob[2]);
                            let (fa, fb) = (values[ca], values[cb]);
                            let t = (iso - fa) / (fb - fa);
                            mesh.vertices.push(lerp(&pa, &pb, t));
                            mesh.vertices.len() - 1
                        });
                    }
                    if ids[0] != ids[1] && ids[1] != ids[2] && ids[0] != ids[2] {
                        mesh.triangles.push(ids);
                    }
                }
            }
        }
    }
    Ok(mesh)
}

fn lerp(a: &Vector3<f64>, b: &Vector3<f64>, t: f64) -> Vector3<f64> {
    a + (b - a) * t
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn ball_grid(radius: f64) -> OccupancyGrid {
        let n = (2.0 * radius) as usize + 5;
        let mut g = OccupancyGrid::empty(Vector3::zeros(), 1.0, [n, n, n]);
        let c = Vector3::repeat(n as f64 / 2.0);
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    if (g.cell_center(i, j, k) - c).norm() <= radius {
                        g.set(i, j, k, true);
                    }
                }
            }
        }
        g
    }

    fn signed_volume(m: &TriangleMesh) -> f64 {
        m.triangles
            .iter()
            .map(|t| m.vertices[t[0]].dot(&m.vertices[t[1]].cross(&m.vertices[t[2]])) / 6.0)
            .sum()
    }

    #[test]
    fn empty_grid_gives_empty_mesh() {
        let g = OccupancyGrid::empty(Vector3::zeros(), 0.1, [4, 4, 4]);
        assert!(marching_cubes(&g, 0.5, false).unwrap().is_empty());
    }

    #[test]
    fn ball_is_closed_and_outward() {
        let g = ball_grid(10.0);
        let m = marching_cubes(&g, 0.5, false).unwrap();
        m.validate().unwrap();
        let mut edges = HashSet::new();
        for t in &m.triangles {
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                edges.insert((a.min(b), a.max(b)));
            }
        }
        let chi = m.vertices.len() as i64 - edges.len() as i64 + m.triangles.len() as i64;
        assert_eq!(chi, 2);
        assert!(signed_volume(&m) > 0.0);
    }

    #[test]
    fn smoothed_ball_is_outward() {
        let m = marching_cubes(&ball_grid(6.0), 0.5, true).unwrap();
        assert!(!m.is_empty());
        assert!(signed_volume(&m) > 0.0);
    }

    #[test]
    fn single_cell_gives_octahedron() {
        let mut g = OccupancyGrid::empty(Vector3::zeros(), 1.0, [3, 3, 3]);
        g.set(1, 1, 1, true);
        let m = marching_cubes(&g, 0.5, false).unwrap();
        assert_eq!(m.vertices.len(), 6);
        assert_eq!(m.triangles.len(), 8);
        assert!(signed_volume(&m) > 0.0);
    }

    #[test]
    fn rejects_iso_out_of_range() {
        let g = OccupancyGrid::empty(Vector3::zeros(), 1.0, [2, 2, 2]);
        assert!(marching_cubes(&g, 0.0, false).is_err());
        assert!(marching_cubes(&g, 1.0, false).is_err());
    }
}

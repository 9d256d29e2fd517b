//! Fixtures and independent oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{Vector2, Vector3};
use wanderkit_core::recon::TriangleMesh;

/// Flat grid of `nx x ny` square cells of side `cell`, each split into two
/// counter-clockwise triangles, skipping cells where `hole(i, j)` holds.
pub fn grid_mesh(nx: usize, ny: usize, cell: f64, hole: impl Fn(usize, usize) -> bool) -> TriangleMesh {
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut vertices = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push(Vector3::new(i as f64 * cell, j as f64 * cell, 0.0));
        }
    }
    let mut triangles = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            if !hole(i, j) {
                triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
    }
    TriangleMesh { vertices, triangles }.retain_faces(|_| true)
}

/// Wall occupying `[2.5, 3.5] x [0, 3]` inside the `[0, 6] x [0, 4]` floor.
pub const U_WALL: (f64, f64, f64, f64) = (2.5, 3.5, 0.0, 3.0);

/// A 6 x 4 m floor with a wall rising from one long side, leaving a U-shaped corridor.
pub fn u_corridor() -> TriangleMesh {
    grid_mesh(12, 8, 0.5, |i, j| (5..7).contains(&i) && j < 6)
}

pub fn in_u_corridor(p: &Vector2<f64>) -> bool {
    let (x0, x1, y0, y1) = U_WALL;
    (0.0..=6.0).contains(&p.x) && (0.0..=4.0).contains(&p.y) && !(p.x > x0 && p.x < x1 && p.y >= y0 && p.y < y1)
}

/// True when segment `ab` avoids the open interior of the wall rectangle.
fn visible(a: &Vector2<f64>, b: &Vector2<f64>) -> bool {
    let (x0, x1, y0, y1) = U_WALL;
    let d = b - a;
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for (p, q) in [(-d.x, a.x - x0), (d.x, x1 - a.x), (-d.y, a.y - y0), (d.y, y1 - a.y)] {
        if p == 0.0 {
            if q < 0.0 {
                return true;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
        }
    }
    if t0 >= t1 {
        return true;
    }
    let m = a + d * ((t0 + t1) / 2.0);
    !(m.x > x0 && m.x < x1 && m.y > y0 && m.y < y1)
}

/// Shortest obstacle-avoiding distance in the U corridor by Dijkstra over the
/// visibility graph of the endpoints and the wall's two free corners.
pub fn u_corridor_oracle(a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    let (x0, x1, _, y1) = U_WALL;
    let nodes = [*a, *b, Vector2::new(x0, y1), Vector2::new(x1, y1)];
    let n = nodes.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    dist[0] = 0.0;
    for _ in 0..n {
        let u = (0..n).filter(|&i| !done[i]).min_by(|&i, &j| dist[i].total_cmp(&dist[j])).unwrap();
        done[u] = true;
        for v in 0..n {
            if !done[v] && visible(&nodes[u], &nodes[v]) {
                dist[v] = dist[v].min(dist[u] + (nodes[v] - nodes[u]).norm());
            }
        }
    }
    dist[1]
}

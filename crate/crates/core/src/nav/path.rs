//! A* over directed portal crossings, string pulling inside the corridor, and a
//! corridor repair step that swings the corridor to the other side of interior
//! vertices the pulled string wraps around.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::{NavError, NavMesh, SurfacePoint};

/// Waypoints on the navmesh surface. Consecutive waypoints share a triangle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub waypoints: Vec<Vector3<f64>>,
    pub length: f64,
}

impl Path {
    pub fn from_waypoints(waypoints: Vec<Vector3<f64>>) -> Self {
        let length = waypoints.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
        Self { waypoints, length }
    }
}

/// Bound on corridor repair rounds.
const MAX_REPAIRS: usize = 256;
/// Points closer than this are merged when emitting waypoints.
const MERGE_EPS: f64 = 1e-12;

#[derive(PartialEq)]
struct Open {
    f: f64,
    node: usize,
}

impl Eq for Open {}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        other.f.total_cmp(&self.f).then(other.node.cmp(&self.node))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub(super) fn plan(nav: &NavMesh, start: &SurfacePoint, goal: &SurfacePoint) -> Result<Path, NavError> {
    let (rs, rg) = (nav.region(start.triangle), nav.region(goal.triangle));
    if rs != rg {
        return Err(NavError::Unreachable { start_region: rs, goal_region: rg });
    }
    if start.point == goal.point {
        return Ok(Path::from_waypoints(vec![start.point]));
    }
    if start.triangle == goal.triangle {
        return Ok(Path::from_waypoints(vec![start.point, goal.point]));
    }
    let mut corridor = astar(nav, start, goal).ok_or(NavError::Unreachable { start_region: rs, goal_region: rg })?;
    let mut best = pull(nav, &corridor, start, goal);
    for _ in 0..MAX_REPAIRS {
        let mut improved = false;
        let wrapped: Vec<usize> = best.wrapped_vertices(nav).collect();
        'apexes: for v in wrapped {
            for alt in swing_corridors(nav, &corridor, v) {
                let cand = pull(nav, &alt, start, goal);
                if cand.path.length < best.path.length - MERGE_EPS {
                    corridor = alt;
                    best = cand;
                    improved = true;
                    break 'apexes;
                }
            }
        }
        if !improved {
            break;
        }
    }
    Ok(best.path)
}

fn edge_mid(nav: &NavMesh, t: usize, e: usize) -> Vector3<f64> {
    let tri = nav.triangles[t];
    (nav.vertices[tri[e]] + nav.vertices[tri[(e + 1) % 3]]) * 0.5
}

/// Triangle sequence from the start triangle to the goal triangle.
fn astar(nav: &NavMesh, start: &SurfacePoint, goal: &SurfacePoint) -> Option<Vec<usize>> {
    let goal_node = 3 * nav.len();
    let mut g = vec![f64::INFINITY; goal_node + 1];
    let mut parent = vec![usize::MAX; goal_node + 1];
    let mut closed = vec![false; goal_node + 1];
    let mut heap = BinaryHeap::new();
    let h = |p: &Vector3<f64>| (p - goal.point).norm();
    for e in 0..3 {
        if nav.neighbors[start.triangle][e].is_some() {
            let node = 3 * start.triangle + e;
            let m = edge_mid(nav, start.triangle, e);
            g[node] = (m - start.point).norm();
            heap.push(Open { f: g[node] + h(&m), node });
        }
    }
    while let Some(Open { node, .. }) = heap.pop() {
        if std::mem::replace(&mut closed[node], true) {
            continue;
        }
        if node == goal_node {
            let mut chain = Vec::new();
            let mut n = parent[goal_node];
            while n != usize::MAX {
                chain.push(n);
                n = parent[n];
            }
            let mut corridor = vec![start.triangle];
            corridor.extend(chain.iter().rev().map(|&n| nav.neighbors[n / 3][n % 3].expect("portal node")));
            return Some(remove_loops(corridor));
        }
        let (t, e) = (node / 3, node % 3);
        let next = nav.neighbors[t][e].expect("portal node");
        let p = edge_mid(nav, t, e);
        if next == goal.triangle {
            let cand = g[node] + (p - goal.point).norm();
            if cand < g[goal_node] {
                g[goal_node] = cand;
                parent[goal_node] = node;
                heap.push(Open { f: cand, node: goal_node });
            }
        }
        for e2 in 0..3 {
            match nav.neighbors[next][e2] {
                Some(m) if m != t => {
                    let n2 = 3 * next + e2;
                    let q = edge_mid(nav, next, e2);
                    let cand = g[node] + (q - p).norm();
                    if !closed[n2] && cand < g[n2] {
                        g[n2] = cand;
                        parent[n2] = node;
                        heap.push(Open { f: cand + h(&q), node: n2 });
                    }
                }
                _ => {}
            }
        }
    }
    None
}

/// Cuts out any detour that returns to an already visited triangle.
fn remove_loops(corridor: Vec<usize>) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::with_capacity(corridor.len());
    let mut at: HashMap<usize, usize> = HashMap::new();
    for t in corridor {
        if let Some(&i) = at.get(&t) {
            for dropped in out.drain(i + 1..) {
                at.remove(&dropped);
            }
        } else {
            at.insert(t, out.len());
            out.push(t);
        }
    }
    out
}

#[derive(Debug, Clone, Copy)]
struct Corner {
    p2: Vector2<f64>,
    p3: Vector3<f64>,
    /// Navmesh vertex this corner sits on, unless it was moved off it.
    vertex: Option<usize>,
}

struct Portal {
    left: Corner,
    right: Corner,
    /// Unshrunk edge endpoints (left, right), for surface crossings.
    edge: Option<(Vector3<f64>, Vector3<f64>)>,
}

struct Pulled {
    path: Path,
    apex_vertices: Vec<usize>,
}

impl Pulled {
    fn wrapped_vertices<'a>(&'a self, nav: &'a NavMesh) -> impl Iterator<Item = usize> + 'a {
        self.apex_vertices.iter().copied().filter(|&v| !nav.boundary_vertex[v])
    }
}

fn cross(a: &Vector2<f64>, b: &Vector2<f64>, c: &Vector2<f64>) -> f64 {
    (b - a).perp(&(c - a))
}

fn portals(nav: &NavMesh, corridor: &[usize], start: &SurfacePoint, goal: &SurfacePoint) -> Vec<Portal> {
    let point = |p: Vector3<f64>| Corner { p2: nav.project(&p), p3: p, vertex: None };
    let r = nav.params.agent_radius;
    let mut out = vec![Portal { left: point(start.point), right: point(start.point), edge: None }];
    for w in corridor.windows(2) {
        let (t, n) = (w[0], w[1]);
        let e = (0..3).find(|&e| nav.neighbors[t][e] == Some(n)).expect("corridor triangles are adjacent");
        let tri = nav.triangles[t];
        // Leaving a counter-clockwise triangle, the edge's second vertex is on the left.
        let (lv, rv) = (tri[(e + 1) % 3], tri[e]);
        let (l3, r3) = (nav.vertices[lv], nav.vertices[rv]);
        let len = (l3 - r3).norm();
        let shift = r.min(len / 2.0);
        let corner = |v: usize, own: Vector3<f64>, other: Vector3<f64>| {
            if nav.boundary_vertex[v] && shift > 0.0 {
                point(own + (other - own) * (shift / len))
            } else {
                Corner { p2: nav.project(&own), p3: own, vertex: Some(v) }
            }
        };
        out.push(Portal { left: corner(lv, l3, r3), right: corner(rv, r3, l3), edge: Some((l3, r3)) });
    }
    out.push(Portal { left: point(goal.point), right: point(goal.point), edge: None });
    out
}

/// String pulling through the corridor's portals; returns apex corners with their portal index.
fn funnel(portals: &[Portal]) -> Vec<(usize, Corner)> {
    let mut apexes = vec![(0, portals[0].left)];
    let (mut left_i, mut right_i) = (0, 0);
    let mut apex = portals[0].left.p2;
    let (mut left, mut right) = (portals[0].left.p2, portals[0].right.p2);
    let mut i = 1;
    while i < portals.len() {
        let (l, r) = (portals[i].left.p2, portals[i].right.p2);
        if cross(&apex, &right, &r) >= 0.0 {
            if apex == right || cross(&apex, &left, &r) < 0.0 {
                right = r;
                right_i = i;
            } else {
                apexes.push((left_i, portals[left_i].left));
                apex = left;
                (right, right_i) = (apex, left_i);
                i = left_i + 1;
                continue;
            }
        }
        if cross(&apex, &left, &l) <= 0.0 {
            if apex == left || cross(&apex, &right, &l) > 0.0 {
                left = l;
                left_i = i;
            } else {
                apexes.push((right_i, portals[right_i].right));
                apex = right;
                (left, left_i) = (apex, right_i);
                i = right_i + 1;
                continue;
            }
        }
        i += 1;
    }
    let last = portals.len() - 1;
    apexes.push((last, portals[last].left));
    apexes
}

/// Whether `p` lies on the edge shared by adjacent triangles `t` and `n`.
fn on_shared_edge(nav: &NavMesh, t: usize, n: usize, p: &Vector3<f64>) -> bool {
    let Some(e) = (0..3).find(|&e| nav.neighbors[t][e] == Some(n)) else { return false };
    let tri = nav.triangles[t];
    let (a, b, q) = (nav.project(&nav.vertices[tri[e]]), nav.project(&nav.vertices[tri[(e + 1) % 3]]), nav.project(p));
    let ab = b - a;
    let len2 = ab.norm_squared();
    let along = ab.dot(&(q - a));
    ab.perp(&(q - a)).abs() <= 1e-12 * len2 && (0.0..=len2).contains(&along)
}

fn pull(nav: &NavMesh, corridor: &[usize], start: &SurfacePoint, goal: &SurfacePoint) -> Pulled {
    // An endpoint lying on a portal would open the funnel to a straight angle; start past it instead.
    let mut corridor = corridor;
    while corridor.len() >= 2 && on_shared_edge(nav, corridor[0], corridor[1], &start.point) {
        corridor = &corridor[1..];
    }
    while corridor.len() >= 2 && on_shared_edge(nav, corridor[corridor.len() - 2], corridor[corridor.len() - 1], &goal.point) {
        corridor = &corridor[..corridor.len() - 1];
    }
    let portals = portals(nav, corridor, start, goal);
    let apexes = funnel(&portals);
    let mut waypoints: Vec<Vector3<f64>> = Vec::new();
    let mut push = |p: Vector3<f64>| {
        if waypoints.last().is_none_or(|q| (p - q).norm() > MERGE_EPS) {
            waypoints.push(p);
        }
    };
    for w in apexes.windows(2) {
        let ((ia, a), (ib, b)) = (w[0], w[1]);
        push(a.p3);
        let d = b.p2 - a.p2;
        for portal in &portals[ia + 1..ib.max(ia + 1)] {
            let Some((l3, r3)) = portal.edge else { continue };
            let (l2, r2) = (nav.project(&l3), nav.project(&r3));
            let wv = l2 - r2;
            let den = d.perp(&wv);
            if den.abs() <= f64::EPSILON * d.norm() * wv.norm() {
                continue;
            }
            let s = (d.perp(&(a.p2 - r2)) / den).clamp(0.0, 1.0);
            push(r3 + (l3 - r3) * s);
        }
    }
    push(apexes.last().expect("funnel emits the goal").1.p3);
    let apex_vertices = apexes.iter().filter_map(|(_, c)| c.vertex).collect();
    Pulled { path: Path::from_waypoints(waypoints), apex_vertices }
}

/// Next triangle around vertex `v`, turning counter-clockwise (`ccw`) or clockwise.
fn fan_step(nav: &NavMesh, t: usize, v: usize, ccw: bool) -> Option<usize> {
    let k = nav.triangles[t].iter().position(|&x| x == v)?;
    nav.neighbors[t][if ccw { k } else { (k + 2) % 3 }]
}

/// Corridors that pass every maximal run of triangles around `v` on the other side of `v`.
fn swing_corridors(nav: &NavMesh, corridor: &[usize], v: usize) -> Vec<Vec<usize>> {
    let has_v = |t: usize| nav.triangles[t].contains(&v);
    let mut out = Vec::new();
    let mut a = 0;
    while a < corridor.len() {
        if !has_v(corridor[a]) {
            a += 1;
            continue;
        }
        let mut b = a;
        while b + 1 < corridor.len() && has_v(corridor[b + 1]) {
            b += 1;
        }
        if b > a {
            let dir = fan_step(nav, corridor[a], v, true) == Some(corridor[a + 1]);
            let mut arc = vec![corridor[a]];
            let mut t = corridor[a];
            let mut ok = false;
            for _ in 0..=corridor.len() + 64 {
                match fan_step(nav, t, v, !dir) {
                    Some(n) if n == corridor[a] => break,
                    Some(n) => {
                        arc.push(n);
                        t = n;
                        if n == corridor[b] {
                            ok = true;
                            break;
                        }
                    }
                    None => break,
                }
            }
            if ok {
                let mut alt = corridor[..a].to_vec();
                alt.extend(arc);
                alt.extend_from_slice(&corridor[b + 1..]);
                out.push(remove_loops(alt));
            }
        }
        a = b + 1;
    }
    out
}

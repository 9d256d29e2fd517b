use nalgebra::Vector3;

/// Closest point to `p` on triangle `abc` (Voronoi-region walk).
pub fn closest_point_on_triangle(p: &Vector3<f64>, a: &Vector3<f64>, b: &Vector3<f64>, c: &Vector3<f64>) -> Vector3<f64> {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone)]
struct Node {
    min: Vector3<f64>,
    max: Vector3<f64>,
    /// Leaf: `start..end` into `order`. Inner: children at `left` and `left + 1`.
    start: usize,
    end: usize,
    left: Option<usize>,
}

/// Axis-aligned bounding-volume hierarchy over triangles for nearest-point queries.
#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<usize>,
}

fn box_dist2(p: &Vector3<f64>, min: &Vector3<f64>, max: &Vector3<f64>) -> f64 {
    (0..3)
        .map(|a| {
            let d = (min[a] - p[a]).max(0.0).max(p[a] - max[a]);
            d * d
        })
        .sum()
}

impl Bvh {
    pub fn build(vertices: &[Vector3<f64>], triangles: &[[usize; 3]]) -> Self {
        let mut bvh = Bvh { nodes: Vec::new(), order: (0..triangles.len()).collect() };
        let centroids: Vec<Vector3<f64>> = triangles
            .iter()
            .map(|t| (vertices[t[0]] + vertices[t[1]] + vertices[t[2]]) / 3.0)
            .collect();
        if !triangles.is_empty() {
            bvh.nodes.push(Node { min: Vector3::zeros(), max: Vector3::zeros(), start: 0, end: 0, left: None });
            bvh.split(0, 0, triangles.len(), vertices, triangles, &centroids);
        }
        bvh
    }

    fn split(
        &mut self,
        node: usize,
        start: usize,
        end: usize,
        vertices: &[Vector3<f64>],
        triangles: &[[usize; 3]],
        centroids: &[Vector3<f64>],
    ) {
        let mut min = Vector3::repeat(f64::INFINITY);
        let mut max = Vector3::repeat(f64::NEG_INFINITY);
        for &t in &self.order[start..end] {
            for &v in &triangles[t] {
                min = min.inf(&vertices[v]);
                max = max.sup(&vertices[v]);
            }
        }
        self.nodes[node] = Node { min, max, start, end, left: None };
        if end - start <= LEAF_SIZE {
            return;
        }
        let extent = max - min;
        let axis = extent.imax();
        let mid = start + (end - start) / 2;
        self.order[start..end]
            .select_nth_unstable_by(mid - start, |&a, &b| centroids[a][axis].total_cmp(&centroids[b][axis]).then(a.cmp(&b)));
        let left = self.nodes.len();
        let blank = Node { min, max, start: 0, end: 0, left: None };
        self.nodes.push(blank.clone());
        self.nodes.push(blank);
        self.nodes[node].left = Some(left);
        self.split(left, start, mid, vertices, triangles, centroids);
        self.split(left + 1, mid, end, vertices, triangles, centroids);
    }

    /// Nearest triangle to `p`: `(triangle, closest point, squared distance)`.
    /// Equal distances resolve to the lowest triangle id.
    pub fn nearest(
        &self,
        p: &Vector3<f64>,
        vertices: &[Vector3<f64>],
        triangles: &[[usize; 3]],
    ) -> Option<(usize, Vector3<f64>, f64)> {
        let mut best: Option<(usize, Vector3<f64>, f64)> = None;
        if self.nodes.is_empty() {
            return None;
        }
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            let bd = box_dist2(p, &node.min, &node.max);
            if best.as_ref().is_some_and(|b| bd > b.2) {
                continue;
            }
            match node.left {
                Some(l) => {
                    // Visit the nearer child first.
                    let dl = box_dist2(p, &self.nodes[l].min, &self.nodes[l].max);
                    let dr = box_dist2(p, &self.nodes[l + 1].min, &self.nodes[l + 1].max);
                    if dl <= dr {
                        stack.push(l + 1);
                        stack.push(l);
                    } else {
                        stack.push(l);
                        stack.push(l + 1);
                    }
                }
                None => {
                    for &t in &self.order[node.start..node.end] {
                        let [a, b, c] = triangles[t];
                        let q = closest_point_on_triangle(p, &vertices[a], &vertices[b], &vertices[c]);
                        let d2 = (q - p).norm_squared();
                        let better = match &best {
                            None => true,
                            Some((bt, _, bd2)) => d2 < *bd2 || (d2 == *bd2 && t < *bt),
                        };
                        if better {
                            best = Some((t, q, d2));
                        }
                    }
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn closest_point_regions() {
        let (a, b, c) = (Vector3::zeros(), Vector3::new(2.0, 0.0, 0.0), Vector3::new(0.0, 2.0, 0.0));
        assert_eq!(closest_point_on_triangle(&Vector3::new(0.5, 0.5, 1.0), &a, &b, &c), Vector3::new(0.5, 0.5, 0.0));
        assert_eq!(closest_point_on_triangle(&Vector3::new(-1.0, -1.0, 0.0), &a, &b, &c), a);
        assert_eq!(closest_point_on_triangle(&Vector3::new(1.0, -3.0, 0.0), &a, &b, &c), Vector3::new(1.0, 0.0, 0.0));
        assert_eq!(closest_point_on_triangle(&Vector3::new(2.0, 2.0, 0.0), &a, &b, &c), Vector3::new(1.0, 1.0, 0.0));
    }

    #[test]
    fn matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for i in 0..200 {
            let o = Vector3::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0), rng.random_range(-2.0..2.0));
            for _ in 0..3 {
                vertices.push(o + Vector3::new(rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()));
            }
            triangles.push([3 * i, 3 * i + 1, 3 * i + 2]);
        }
        let bvh = Bvh::build(&vertices, &triangles);
        for _ in 0..200 {
            let p = Vector3::new(rng.random_range(-12.0..12.0), rng.random_range(-12.0..12.0), rng.random_range(-3.0..3.0));
            let (t, _, d2) = bvh.nearest(&p, &vertices, &triangles).unwrap();
            let mut brute = (usize::MAX, f64::INFINITY);
            for (i, tri) in triangles.iter().enumerate() {
                let q = closest_point_on_triangle(&p, &vertices[tri[0]], &vertices[tri[1]], &vertices[tri[2]]);
                let d = (q - p).norm_squared();
                if d < brute.1 {
                    brute = (i, d);
                }
            }
            assert_eq!((t, d2), brute);
        }
    }
}

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::Vector3;

/// Static 3D k-d tree over borrowed points for exact nearest-neighbor queries.
///
/// The tree is implicit: `order` is permuted so that every subrange `[lo, hi)`
/// stores its splitting point at the midpoint, split on `depth % 3`.
pub struct KdTree<'a> {
    points: &'a [Vector3<f64>],
    order: Vec<usize>,
}

#[derive(PartialEq)]
struct Candidate {
    dist2: f64,
    index: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2.total_cmp(&other.dist2).then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<'a> KdTree<'a> {
    pub fn new(points: &'a [Vector3<f64>]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        build(points, &mut order, 0);
        Self { points, order }
    }

    /// Squared distances to the `k` nearest points other than `points[skip]`
    /// (pass `usize::MAX` to skip nothing), ascending.
    pub fn nearest_dist2(&self, query: &Vector3<f64>, k: usize, skip: usize) -> Vec<f64> {
        let mut heap = BinaryHeap::with_capacity(k + 1);
        if k > 0 {
            self.search(query, k, skip, 0, self.order.len(), 0, &mut heap);
        }
        let mut out: Vec<f64> = heap.into_iter().map(|c| c.dist2).collect();
        out.sort_by(f64::total_cmp);
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn search(
        &self,
        q: &Vector3<f64>,
        k: usize,
        skip: usize,
        lo: usize,
        hi: usize,
        depth: usize,
        heap: &mut BinaryHeap<Candidate>,
    ) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let idx = self.order[mid];
        let p = &self.points[idx];
        if idx != skip {
            let dist2 = (p - q).norm_squared();
            if heap.len() < k {
                heap.push(Candidate { dist2, index: idx });
            } else if dist2 < heap.peek().expect("heap is full").dist2 {
                heap.pop();
                heap.push(Candidate { dist2, index: idx });
            }
        }
        let axis = depth % 3;
        let diff = q[axis] - p[axis];
        let (near, far) = if diff < 0.0 { ((lo, mid), (mid + 1, hi)) } else { ((mid + 1, hi), (lo, mid)) };
        self.search(q, k, skip, near.0, near.1, depth + 1, heap);
        if heap.len() < k || diff * diff < heap.peek().expect("heap is non-empty").dist2 {
            self.search(q, k, skip, far.0, far.1, depth + 1, heap);
        }
    }
}

fn build(points: &[Vector3<f64>], order: &mut [usize], depth: usize) {
    if order.len() <= 1 {
        return;
    }
    let axis = depth % 3;
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b)));
    let (left, right) = order.split_at_mut(mid);
    build(points, left, depth + 1);
    build(points, &mut right[1..], depth + 1);
}

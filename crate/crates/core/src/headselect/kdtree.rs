//! Static 2-d tree for k-nearest-neighbour queries.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::Point;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance_sq: f64,
}

// Max-heap order on (distance, index) so the worst kept neighbour is on top.
impl Eq for Neighbor {}

impl Ord for Neighbor {
    fn cmp(&self, other: &Self) -> Ordering {
        self.distance_sq
            .total_cmp(&other.distance_sq)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Neighbor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Point>,
    // Implicit balanced tree: node `lo..hi` has its split at `(lo + hi) / 2`.
    perm: Vec<usize>,
}

fn coord(p: &Point, axis: usize) -> f64 {
    if axis == 0 {
        p.x
    } else {
        p.y
    }
}

impl KdTree {
    pub fn build(points: &[Point]) -> Self {
        let mut perm: Vec<usize> = (0..points.len()).collect();
        Self::build_rec(points, &mut perm, 0);
        Self {
            points: points.to_vec(),
            perm,
        }
    }

    fn build_rec(points: &[Point], slice: &mut [usize], depth: usize) {
        if slice.len() <= 1 {
            return;
        }
        let axis = depth % 2;
        let mid = slice.len() / 2;
        slice.select_nth_unstable_by(mid, |&a, &b| {
            coord(&points[a], axis)
                .total_cmp(&coord(&points[b], axis))
                .then(a.cmp(&b))
        });
        let (left, right) = slice.split_at_mut(mid);
        Self::build_rec(points, left, depth + 1);
        Self::build_rec(points, &mut right[1..], depth + 1);
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Up to `k` nearest points to `target`, skipping index `exclude`,
    /// ordered by distance then index.
    pub fn nearest(&self, target: &Point, k: usize, exclude: Option<usize>) -> Vec<Neighbor> {
        let mut heap = BinaryHeap::with_capacity(k + 1);
        if k > 0 {
            self.search(target, k, exclude, 0, self.perm.len(), 0, &mut heap);
        }
        heap.into_sorted_vec()
    }

    #[allow(clippy::too_many_arguments)]
    fn search(
        &self,
        target: &Point,
        k: usize,
        exclude: Option<usize>,
        lo: usize,
        hi: usize,
        depth: usize,
        heap: &mut BinaryHeap<Neighbor>,
    ) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let index = self.perm[mid];
        let p = &self.points[index];
        if exclude != Some(index) {
            let cand = Neighbor {
                index,
                distance_sq: p.distance_sq(target),
            };
            if heap.len() < k {
                heap.push(cand);
            } else if cand < *heap.peek().expect("heap is full") {
                heap.pop();
                heap.push(cand);
            }
        }
        let axis = depth % 2;
        let diff = coord(target, axis) - coord(p, axis);
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(target, k, exclude, near.0, near.1, depth + 1, heap);
        // `<=` keeps equal-distance points on the far side reachable for the
        // index tie-break.
        if heap.len() < k || diff * diff <= heap.peek().expect("heap is non-empty").distance_sq {
            self.search(target, k, exclude, far.0, far.1, depth + 1, heap);
        }
    }
}

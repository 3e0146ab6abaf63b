use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::geometry::Vec3;

const LEAF_SIZE: usize = 8;

/// A query result: point index and squared Euclidean distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist2: f64,
}

impl Neighbor {
    /// Orders by distance, then by index, which makes every query result
    /// unique even with equidistant points.
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.dist2.total_cmp(&other.dist2).then(self.index.cmp(&other.index))
    }
}

impl Eq for Neighbor {}

impl PartialOrd for Neighbor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Neighbor {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key_cmp(other)
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

/// Exact k-d tree over a fixed set of 3D points.
///
/// Immutable after construction; queries take `&self` and can run
/// concurrently.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    points: Vec<Vec3>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl NeighborIndex {
    pub fn new(points: &[Vec3]) -> Self {
        let mut index = Self { points: points.to_vec(), order: (0..points.len()).collect(), nodes: Vec::new() };
        if !points.is_empty() {
            index.build(0, points.len());
        }
        index
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let (mut lo, mut hi) = (Vec3::repeat(f64::INFINITY), Vec3::repeat(f64::NEG_INFINITY));
        for &i in &self.order[start..end] {
            lo = lo.inf(&self.points[i]);
            hi = hi.sup(&self.points[i]);
        }
        let axis = (hi - lo).imax();
        if !(hi[axis] > lo[axis]) {
            // All points coincide.
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.order[start..end]
            .select_nth_unstable_by(mid - start, |&a, &b| points[a][axis].total_cmp(&points[b][axis]));
        let value = self.points[self.order[mid]][axis];
        self.nodes.push(Node::Split { axis, value, left: 0, right: 0 });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split { axis, value, left, right };
        id
    }

    /// The `k` nearest points in ascending distance, ties broken by lower
    /// index. Returns fewer than `k` only when the index is smaller than `k`.
    pub fn knn(&self, query: &Vec3, k: usize) -> Vec<Neighbor> {
        if k == 0 || self.points.is_empty() {
            return Vec::new();
        }
        let mut heap: BinaryHeap<Neighbor> = BinaryHeap::with_capacity(k + 1);
        self.knn_node(0, query, k, &mut heap);
        heap.into_sorted_vec()
    }

    pub fn nearest(&self, query: &Vec3) -> Option<Neighbor> {
        self.knn(query, 1).into_iter().next()
    }

    fn knn_node(&self, node: usize, query: &Vec3, k: usize, heap: &mut BinaryHeap<Neighbor>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let cand = Neighbor { index: i, dist2: (self.points[i] - query).norm_squared() };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().expect("heap holds k items") {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = query[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.knn_node(near, query, k, heap);
                // Equality keeps equidistant lower-index points reachable.
                if heap.len() < k || diff * diff <= heap.peek().map_or(f64::INFINITY, |n| n.dist2) {
                    self.knn_node(far, query, k, heap);
                }
            }
        }
    }

    /// All points with `‖p − query‖ ≤ radius`, ascending by distance then
    /// index.
    pub fn within_radius(&self, query: &Vec3, radius: f64) -> Vec<Neighbor> {
        let mut out = Vec::new();
        if self.points.is_empty() || !(radius >= 0.0) {
            return out;
        }
        self.radius_node(0, query, radius * radius, &mut out);
        out.sort_unstable();
        out
    }

    fn radius_node(&self, node: usize, query: &Vec3, r2: f64, out: &mut Vec<Neighbor>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let dist2 = (self.points[i] - query).norm_squared();
                    if dist2 <= r2 {
                        out.push(Neighbor { index: i, dist2 });
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = query[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.radius_node(near, query, r2, out);
                if diff * diff <= r2 {
                    self.radius_node(far, query, r2, out);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use alloc::vec;
    use rand::Rng;

    fn brute_knn(points: &[Vec3], q: &Vec3, k: usize) -> Vec<Neighbor> {
        let mut all: Vec<Neighbor> =
            points.iter().enumerate().map(|(index, p)| Neighbor { index, dist2: (p - q).norm_squared() }).collect();
        all.sort();
        all.truncate(k);
        all
    }

    fn random_points(seed: u64, n: usize) -> Vec<Vec3> {
        let mut rng = rng_from_seed(seed);
        (0..n).map(|_| Vec3::new(rng.random(), rng.random(), rng.random())).collect()
    }

    #[test]
    fn self_query_returns_zero_distance() {
        let pts = random_points(1, 100);
        let index = NeighborIndex::new(&pts);
        for (i, p) in pts.iter().enumerate() {
            let n = index.nearest(p).unwrap();
            assert_eq!(n.index, i);
            assert_eq!(n.dist2, 0.0);
        }
    }

    #[test]
    fn collinear_hand_case() {
        let pts = vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(3.0, 0.0, 0.0)];
        let index = NeighborIndex::new(&pts);
        let res = index.knn(&Vec3::zeros(), 2);
        assert_eq!(res.iter().map(|n| n.index).collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(res[1].dist2, 1.0);
    }

    #[test]
    fn knn_matches_brute_force() {
        let pts = random_points(2, 500);
        let index = NeighborIndex::new(&pts);
        for q in random_points(3, 100) {
            assert_eq!(index.knn(&q, 8), brute_knn(&pts, &q, 8));
        }
    }

    #[test]
    fn ties_prefer_lower_index() {
        // Integer lattice with duplicated points: many exact ties.
        let mut pts = Vec::new();
        for x in 0..5 {
            for y in 0..5 {
                for z in 0..3 {
                    pts.push(Vec3::new(x as f64, y as f64, z as f64));
                }
            }
        }
        let dup = pts.clone();
        pts.extend(dup);
        let index = NeighborIndex::new(&pts);
        for q in [Vec3::new(2.0, 2.0, 1.0), Vec3::new(0.5, 0.5, 0.5), Vec3::new(4.0, 0.0, 2.0)] {
            for k in [1, 4, 7, 20] {
                assert_eq!(index.knn(&q, k), brute_knn(&pts, &q, k));
            }
        }
    }

    #[test]
    fn radius_matches_brute_force() {
        let pts = random_points(4, 400);
        let index = NeighborIndex::new(&pts);
        for q in random_points(5, 50) {
            let mut expect: Vec<Neighbor> = pts
                .iter()
                .enumerate()
                .map(|(index, p)| Neighbor { index, dist2: (p - q).norm_squared() })
                .filter(|n| n.dist2 <= 0.15 * 0.15)
                .collect();
            expect.sort();
            assert_eq!(index.within_radius(&q, 0.15), expect);
        }
    }

    #[test]
    fn small_and_empty_indices() {
        let empty = NeighborIndex::new(&[]);
        assert!(empty.knn(&Vec3::zeros(), 3).is_empty());
        let two = NeighborIndex::new(&[Vec3::zeros(), Vec3::x()]);
        assert_eq!(two.knn(&Vec3::zeros(), 5).len(), 2);
        let same = NeighborIndex::new(&vec![Vec3::repeat(1.0); 30]);
        let res = same.knn(&Vec3::zeros(), 3);
        assert_eq!(res.iter().map(|n| n.index).collect::<Vec<_>>(), vec![0, 1, 2]);
    }
}

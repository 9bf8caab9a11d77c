//! Max-norm nearest-neighbor searches.
//!
//! A bounding-box kd-tree and a brute-force reference with identical
//! semantics. The two must agree bit-exactly: counts use strict `<`, kth
//! distances are realized point distances, and k-nearest ties break on
//! (distance, original index).

use crate::error::{Error, Result};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Row-major point matrix.
#[derive(Clone, Debug)]
pub struct PointSet {
    data: Vec<f64>,
    dim: usize,
    n: usize,
}

impl PointSet {
    /// Stacks equal-length columns into rows.
    pub fn from_columns(cols: &[&[f64]]) -> Result<Self> {
        if cols.is_empty() {
            return Err(Error::InvalidData("point set needs at least one column".into()));
        }
        let n = cols[0].len();
        for c in cols {
            if c.len() != n {
                return Err(Error::InvalidData(format!(
                    "column lengths differ: {} vs {}",
                    n,
                    c.len()
                )));
            }
        }
        let dim = cols.len();
        let mut data = vec![0.0; n * dim];
        for (j, col) in cols.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::InvalidData(format!(
                        "non-finite value {v} at row {i}, column {j}"
                    )));
                }
                data[i * dim + j] = v;
            }
        }
        Ok(PointSet { data, dim, n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// Chebyshev (supremum) distance.
pub fn dist_inf(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut m = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        let d = (x - y).abs();
        if d > m {
            m = d;
        }
    }
    m
}

const LEAF_SIZE: usize = 16;

struct Node {
    lo: Box<[f64]>,
    hi: Box<[f64]>,
    start: usize,
    end: usize,
    // usize::MAX marks a leaf
    left: usize,
    right: usize,
}

impl Node {
    fn is_leaf(&self) -> bool {
        self.left == usize::MAX
    }

    fn size(&self) -> usize {
        self.end - self.start
    }
}

/// Static kd-tree over a point set, splitting the widest bounding-box side
/// at the median. Rows are copied in leaf order for locality.
pub struct KdTree {
    dim: usize,
    data: Vec<f64>,
    orig: Vec<u32>,
    nodes: Vec<Node>,
    root: usize,
}

impl KdTree {
    pub fn build(pts: &PointSet) -> Self {
        let n = pts.n();
        let dim = pts.dim();
        assert!(n > 0, "kd-tree needs at least one point");
        let mut order: Vec<u32> = (0..n as u32).collect();
        let mut nodes = Vec::new();
        let root = build_range(pts, &mut order, 0, &mut nodes);
        let mut data = vec![0.0; n * dim];
        for (pos, &o) in order.iter().enumerate() {
            data[pos * dim..(pos + 1) * dim].copy_from_slice(pts.row(o as usize));
        }
        KdTree { dim, data, orig: order, nodes, root }
    }

    fn row(&self, pos: usize) -> &[f64] {
        &self.data[pos * self.dim..(pos + 1) * self.dim]
    }

    /// Lower bound on the distance from `q` to any point in the node's box.
    fn box_min(&self, node: &Node, q: &[f64]) -> f64 {
        let mut m = 0.0f64;
        for d in 0..self.dim {
            let x = q[d];
            let diff = if x < node.lo[d] {
                node.lo[d] - x
            } else if x > node.hi[d] {
                x - node.hi[d]
            } else {
                0.0
            };
            if diff > m {
                m = diff;
            }
        }
        m
    }

    /// Upper bound on the distance from `q` to any point in the node's box.
    fn box_max(&self, node: &Node, q: &[f64]) -> f64 {
        let mut m = 0.0f64;
        for d in 0..self.dim {
            let far = f64::max(q[d] - node.lo[d], node.hi[d] - q[d]);
            if far > m {
                m = far;
            }
        }
        m
    }

    /// Distance to the kth nearest point (1-based k), optionally skipping one
    /// original index (the query point itself).
    pub fn kth_distance(&self, q: &[f64], k: usize, skip: Option<u32>) -> f64 {
        assert!(k >= 1);
        let mut heap: BinaryHeap<OrdF64> = BinaryHeap::with_capacity(k + 1);
        self.kth_rec(self.root, q, k, skip, &mut heap);
        assert!(heap.len() == k, "fewer than k={k} candidate points");
        heap.peek().unwrap().0
    }

    fn kth_rec(&self, id: usize, q: &[f64], k: usize, skip: Option<u32>, heap: &mut BinaryHeap<OrdF64>) {
        let node = &self.nodes[id];
        if heap.len() == k && self.box_min(node, q) >= heap.peek().unwrap().0 {
            return;
        }
        if node.is_leaf() {
            for pos in node.start..node.end {
                if skip == Some(self.orig[pos]) {
                    continue;
                }
                let d = dist_inf(q, self.row(pos));
                if heap.len() < k {
                    heap.push(OrdF64(d));
                } else if d < heap.peek().unwrap().0 {
                    heap.pop();
                    heap.push(OrdF64(d));
                }
            }
        } else {
            let (a, b) = (node.left, node.right);
            let (first, second) = if self.box_min(&self.nodes[a], q) <= self.box_min(&self.nodes[b], q) {
                (a, b)
            } else {
                (b, a)
            };
            self.kth_rec(first, q, k, skip, heap);
            self.kth_rec(second, q, k, skip, heap);
        }
    }

    /// Number of points strictly within `radius` of `q`. The query point
    /// itself, if present in the set, is counted (its distance is zero).
    pub fn count_within(&self, q: &[f64], radius: f64) -> usize {
        self.count_rec(self.root, q, radius)
    }

    fn count_rec(&self, id: usize, q: &[f64], radius: f64) -> usize {
        let node = &self.nodes[id];
        if self.box_min(node, q) >= radius {
            return 0;
        }
        if self.box_max(node, q) < radius {
            return node.size();
        }
        if node.is_leaf() {
            (node.start..node.end)
                .filter(|&pos| dist_inf(q, self.row(pos)) < radius)
                .count()
        } else {
            self.count_rec(node.left, q, radius) + self.count_rec(node.right, q, radius)
        }
    }

    /// Original indices of the k nearest points, sorted by (distance, index).
    /// Ties beyond position k are resolved toward smaller original indices.
    pub fn k_nearest(&self, q: &[f64], k: usize, skip: Option<u32>) -> Vec<u32> {
        assert!(k >= 1);
        let mut heap: BinaryHeap<Cand> = BinaryHeap::with_capacity(k + 1);
        self.knear_rec(self.root, q, k, skip, &mut heap);
        assert!(heap.len() == k, "fewer than k={k} candidate points");
        let mut out = heap.into_vec();
        out.sort_unstable();
        out.into_iter().map(|c| c.idx).collect()
    }

    fn knear_rec(&self, id: usize, q: &[f64], k: usize, skip: Option<u32>, heap: &mut BinaryHeap<Cand>) {
        let node = &self.nodes[id];
        if heap.len() == k && self.box_min(node, q) > heap.peek().unwrap().dist {
            return;
        }
        if node.is_leaf() {
            for pos in node.start..node.end {
                let idx = self.orig[pos];
                if skip == Some(idx) {
                    continue;
                }
                let cand = Cand { dist: dist_inf(q, self.row(pos)), idx };
                if heap.len() < k {
                    heap.push(cand);
                } else if cand < *heap.peek().unwrap() {
                    heap.pop();
                    heap.push(cand);
                }
            }
        } else {
            let (a, b) = (node.left, node.right);
            let (first, second) = if self.box_min(&self.nodes[a], q) <= self.box_min(&self.nodes[b], q) {
                (a, b)
            } else {
                (b, a)
            };
            self.knear_rec(first, q, k, skip, heap);
            self.knear_rec(second, q, k, skip, heap);
        }
    }
}

fn build_range(pts: &PointSet, order: &mut [u32], offset: usize, nodes: &mut Vec<Node>) -> usize {
    let dim = pts.dim();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for &o in order.iter() {
        let r = pts.row(o as usize);
        for d in 0..dim {
            lo[d] = lo[d].min(r[d]);
            hi[d] = hi[d].max(r[d]);
        }
    }
    let len = order.len();
    if len <= LEAF_SIZE {
        nodes.push(Node {
            lo: lo.into(),
            hi: hi.into(),
            start: offset,
            end: offset + len,
            left: usize::MAX,
            right: usize::MAX,
        });
        return nodes.len() - 1;
    }
    let split_dim = (0..dim)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .unwrap();
    let mid = len / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        pts.row(a as usize)[split_dim].total_cmp(&pts.row(b as usize)[split_dim])
    });
    let (left_order, right_order) = order.split_at_mut(mid);
    let left = build_range(pts, left_order, offset, nodes);
    let right = build_range(pts, right_order, offset + mid, nodes);
    nodes.push(Node {
        lo: lo.into(),
        hi: hi.into(),
        start: offset,
        end: offset + len,
        left,
        right,
    });
    nodes.len() - 1
}

#[derive(PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[derive(PartialEq)]
struct Cand {
    dist: f64,
    idx: u32,
}

impl Eq for Cand {}

impl PartialOrd for Cand {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cand {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist.total_cmp(&other.dist).then(self.idx.cmp(&other.idx))
    }
}

/// Brute-force reference implementations with the same tie-breaking rules.
pub mod brute {
    use super::{dist_inf, PointSet};

    pub fn kth_distance(pts: &PointSet, q: &[f64], k: usize, skip: Option<u32>) -> f64 {
        let mut ds: Vec<f64> = (0..pts.n())
            .filter(|&i| skip != Some(i as u32))
            .map(|i| dist_inf(q, pts.row(i)))
            .collect();
        assert!(k >= 1 && k <= ds.len(), "fewer than k={k} candidate points");
        ds.select_nth_unstable_by(k - 1, f64::total_cmp);
        ds[k - 1]
    }

    pub fn count_within(pts: &PointSet, q: &[f64], radius: f64) -> usize {
        (0..pts.n()).filter(|&i| dist_inf(q, pts.row(i)) < radius).count()
    }

    pub fn k_nearest(pts: &PointSet, q: &[f64], k: usize, skip: Option<u32>) -> Vec<u32> {
        let mut cands: Vec<(f64, u32)> = (0..pts.n())
            .filter(|&i| skip != Some(i as u32))
            .map(|i| (dist_inf(q, pts.row(i)), i as u32))
            .collect();
        assert!(k >= 1 && k <= cands.len(), "fewer than k={k} candidate points");
        cands.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        cands.truncate(k);
        cands.into_iter().map(|(_, i)| i).collect()
    }
}

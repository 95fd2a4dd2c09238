//! Exact k-nearest-neighbour search.
//!
//! Neighbours are ordered by squared distance, ties broken by lower index.
//! The kd-tree and the brute-force scan return identical lists.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::sample::sq_dist;

const LEAF_SIZE: usize = 16;

/// A neighbour: squared distance and point index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub sq_dist: f64,
    pub index: usize,
}

impl Eq for Neighbor {}

impl Ord for Neighbor {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sq_dist
            .total_cmp(&other.sq_dist)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Neighbor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// The `k` nearest other points of every point, by exhaustive scan.
pub fn knn_brute(points: &[Vec<f64>], k: usize) -> Vec<Vec<Neighbor>> {
    (0..points.len())
        .map(|i| {
            let mut all: Vec<Neighbor> = (0..points.len())
                .filter(|&j| j != i)
                .map(|j| Neighbor {
                    sq_dist: sq_dist(&points[i], &points[j]),
                    index: j,
                })
                .collect();
            all.sort();
            all.truncate(k);
            all
        })
        .collect()
}

enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        dim: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

pub struct KdTree<'a> {
    points: &'a [Vec<f64>],
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl<'a> KdTree<'a> {
    pub fn build(points: &'a [Vec<f64>]) -> Self {
        let mut tree = Self {
            points,
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build_node(0, points.len());
        }
        tree
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let d = self.points[0].len();
        let mut best_dim = 0;
        let mut best_spread = -1.0;
        for k in 0..d {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in &self.order[start..end] {
                lo = lo.min(self.points[i][k]);
                hi = hi.max(self.points[i][k]);
            }
            if hi - lo > best_spread {
                best_spread = hi - lo;
                best_dim = k;
            }
        }
        if best_spread <= 0.0 {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = start + (end - start) / 2;
        let pts = self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            pts[a][best_dim].total_cmp(&pts[b][best_dim])
        });
        let value = pts[self.order[mid]][best_dim];
        self.nodes.push(Node::Split {
            dim: best_dim,
            value,
            left: 0,
            right: 0,
        });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split {
            dim: best_dim,
            value,
            left,
            right,
        };
        id
    }

    /// The `k` nearest points to `query`, skipping index `exclude`.
    pub fn nearest(&self, query: &[f64], k: usize, exclude: Option<usize>) -> Vec<Neighbor> {
        let mut heap = BinaryHeap::with_capacity(k + 1);
        if k > 0 && !self.nodes.is_empty() {
            self.search(0, query, k, exclude, &mut heap);
        }
        let mut out = heap.into_vec();
        out.sort();
        out
    }

    fn search(
        &self,
        node: usize,
        q: &[f64],
        k: usize,
        exclude: Option<usize>,
        heap: &mut BinaryHeap<Neighbor>,
    ) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if Some(i) == exclude {
                        continue;
                    }
                    let cand = Neighbor {
                        sq_dist: sq_dist(q, &self.points[i]),
                        index: i,
                    };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let diff = q[dim] - value;
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(near, q, k, exclude, heap);
                // equal-distance candidates may still win on index, so prune strictly
                if heap.len() < k || diff * diff <= heap.peek().unwrap().sq_dist {
                    self.search(far, q, k, exclude, heap);
                }
            }
        }
    }

    /// Neighbour lists of every indexed point, excluding itself.
    pub fn all_nearest(&self, k: usize) -> Vec<Vec<Neighbor>> {
        use rayon::prelude::*;
        (0..self.points.len())
            .into_par_iter()
            .map(|i| self.nearest(&self.points[i], k, Some(i)))
            .collect()
    }
}

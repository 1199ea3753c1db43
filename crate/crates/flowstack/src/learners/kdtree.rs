//! Exact k-nearest-neighbor search over a kd-tree. Candidates are ordered by
//! (squared distance, row index), so results match a brute-force scan with
//! ties at the k-th rank broken by lower training-row index.

use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone, Serialize, Deserialize)]
enum Node {
    Leaf {
        points: Vec<usize>,
    },
    Split {
        dim: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct KdTree {
    nodes: Vec<Node>,
}

/// Max-heap entry; the "largest" element is the current worst neighbor.
#[derive(PartialEq)]
struct Candidate {
    d2: f64,
    idx: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.d2
            .total_cmp(&other.d2)
            .then(self.idx.cmp(&other.idx))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl KdTree {
    pub fn build(points: &Matrix) -> KdTree {
        let mut tree = KdTree { nodes: Vec::new() };
        if points.rows() > 0 && points.cols() > 0 {
            let indices: Vec<usize> = (0..points.rows()).collect();
            tree.build_node(points, indices, 0);
        } else if points.rows() > 0 {
            tree.nodes.push(Node::Leaf {
                points: (0..points.rows()).collect(),
            });
        }
        tree
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn build_node(&mut self, points: &Matrix, mut indices: Vec<usize>, depth: usize) -> usize {
        if indices.len() <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { points: indices });
            return self.nodes.len() - 1;
        }
        let dim = depth % points.cols();
        let mid = indices.len() / 2;
        indices.sort_unstable_by(|&a, &b| {
            points
                .get(a, dim)
                .total_cmp(&points.get(b, dim))
                .then(a.cmp(&b))
        });
        let value = points.get(indices[mid], dim);
        let right_part = indices.split_off(mid);
        // Degenerate split (all coordinates equal along dim): keep as leaf.
        if indices.is_empty() || right_part.is_empty() {
            let mut all = indices;
            all.extend(right_part);
            self.nodes.push(Node::Leaf { points: all });
            return self.nodes.len() - 1;
        }
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { points: vec![] }); // placeholder
        let left = self.build_node(points, indices, depth + 1);
        let right = self.build_node(points, right_part, depth + 1);
        self.nodes[slot] = Node::Split {
            dim,
            value,
            left,
            right,
        };
        slot
    }

    /// The k nearest rows to `query`, sorted by (distance, row index).
    pub fn nearest(&self, points: &Matrix, query: &[f64], k: usize) -> Vec<usize> {
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        if !self.nodes.is_empty() {
            self.search(points, query, k, 0, &mut heap);
        }
        let mut out: Vec<Candidate> = heap.into_vec();
        out.sort_by(|a, b| a.cmp(b));
        out.into_iter().map(|c| c.idx).collect()
    }

    fn search(
        &self,
        points: &Matrix,
        query: &[f64],
        k: usize,
        node: usize,
        heap: &mut BinaryHeap<Candidate>,
    ) {
        match &self.nodes[node] {
            Node::Leaf { points: rows } => {
                for &i in rows {
                    let cand = Candidate {
                        d2: squared_distance(query, points.row(i)),
                        idx: i,
                    };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if let Some(worst) = heap.peek() {
                        if cand < *worst {
                            heap.pop();
                            heap.push(cand);
                        }
                    }
                }
            }
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let diff = query[*dim] - value;
                let (near, far) = if diff < 0.0 {
                    (*left, *right)
                } else {
                    (*right, *left)
                };
                self.search(points, query, k, near, heap);
                // Visit the far side on exact plane-distance ties too: an
                // equidistant point with a lower index may still win.
                let plane_d2 = diff * diff;
                let must_visit = heap.len() < k
                    || heap
                        .peek()
                        .map_or(true, |worst| plane_d2 <= worst.d2);
                if must_visit {
                    self.search(points, query, k, far, heap);
                }
            }
        }
    }
}

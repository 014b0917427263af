//! Isolation random trees: recursive random axis-aligned splits until every
//! splittable subset is exhausted, and per-point isolation depths.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::Rng;

use crate::dataset::SampleSet;
use crate::rng::TrialRng;

#[derive(Debug, Clone)]
pub enum Node {
    Internal {
        /// 0-based split dimension.
        dim: usize,
        split: f64,
        size: usize,
        left: usize,
        right: usize,
    },
    Leaf {
        members: Vec<usize>,
    },
}

/// A single isolation tree over a [`SampleSet`], stored as an arena with the
/// root at index 0. Left children hold points strictly below the split
/// value, right children the rest.
#[derive(Debug, Clone)]
pub struct IsolationTree {
    nodes: Vec<Node>,
}

impl IsolationTree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn internal_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Internal { .. }))
            .count()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.len() - self.internal_count()
    }

    /// Depth (edges from the root) of the leaf containing each point.
    pub fn depths(&self) -> HashMap<usize, usize> {
        let mut out = HashMap::new();
        self.for_each_leaf_depth(|member, depth| {
            out.insert(member, depth);
        });
        out
    }

    /// Depths written into a dense per-point buffer (index = point index).
    pub fn depths_into(&self, buf: &mut [usize]) {
        self.for_each_leaf_depth(|member, depth| buf[member] = depth);
    }

    fn for_each_leaf_depth(&self, mut f: impl FnMut(usize, usize)) {
        let mut stack = vec![(0usize, 0usize)];
        while let Some((idx, depth)) = stack.pop() {
            match &self.nodes[idx] {
                Node::Internal { left, right, .. } => {
                    stack.push((*right, depth + 1));
                    stack.push((*left, depth + 1));
                }
                Node::Leaf { members } => {
                    for &m in members {
                        f(m, depth);
                    }
                }
            }
        }
    }

    /// Number of edges on the longest root-to-leaf path.
    pub fn height(&self) -> usize {
        let mut max = 0;
        self.for_each_leaf_depth(|_, d| max = max.max(d));
        max
    }

    /// Indented text dump: one node per line, two spaces per level.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let mut stack = vec![(0usize, 0usize)];
        while let Some((idx, level)) = stack.pop() {
            for _ in 0..level {
                out.push_str("  ");
            }
            match &self.nodes[idx] {
                Node::Internal {
                    dim, split, size, left, right,
                } => {
                    writeln!(out, "split dim={} value={} members={}", dim + 1, split, size)
                        .unwrap();
                    stack.push((*right, level + 1));
                    stack.push((*left, level + 1));
                }
                Node::Leaf { members } => {
                    writeln!(out, "leaf members={}", members.len()).unwrap();
                }
            }
        }
        out
    }
}

/// Dimensions along which `indices` has at least two distinct values.
fn splittable_dims(s: &SampleSet, indices: &[usize]) -> Vec<usize> {
    (0..s.dim())
        .filter(|&j| {
            let first = s.point(indices[0])[j];
            indices.iter().any(|&i| s.point(i)[j] != first)
        })
        .collect()
}

/// Builds one isolation tree. Pure function of the sample set and the rng
/// stream; an explicit work stack keeps unbalanced inputs from exhausting
/// call depth.
pub fn build_itree(s: &SampleSet, rng: &mut TrialRng) -> IsolationTree {
    struct Work {
        indices: Vec<usize>,
        // (parent arena index, is_right_child)
        patch: Option<(usize, bool)>,
    }

    let mut nodes: Vec<Node> = Vec::with_capacity(2 * s.len());
    let mut stack = vec![Work {
        indices: (0..s.len()).collect(),
        patch: None,
    }];

    while let Some(Work { indices, patch }) = stack.pop() {
        let omega_c = splittable_dims(s, &indices);
        let idx = nodes.len();
        if let Some((parent, is_right)) = patch {
            if let Node::Internal { left, right, .. } = &mut nodes[parent] {
                if is_right {
                    *right = idx;
                } else {
                    *left = idx;
                }
            }
        }

        if omega_c.is_empty() {
            nodes.push(Node::Leaf { members: indices });
            continue;
        }

        let dim = omega_c[rng.random_range(0..omega_c.len())];
        let (min, max) = indices.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
            let v = s.point(i)[dim];
            (lo.min(v), hi.max(v))
        });
        // Open interval: resample on the measure-zero chance of hitting min.
        let split = loop {
            let p = rng.random_range(min..max);
            if p > min {
                break p;
            }
        };
        let (left_set, right_set): (Vec<usize>, Vec<usize>) =
            indices.iter().partition(|&&i| s.point(i)[dim] < split);
        debug_assert!(!left_set.is_empty() && !right_set.is_empty());

        nodes.push(Node::Internal {
            dim,
            split,
            size: indices.len(),
            left: usize::MAX,
            right: usize::MAX,
        });
        // Right pushed first so the left subtree is built (and consumes
        // randomness) first, matching the recursive definition.
        stack.push(Work {
            indices: right_set,
            patch: Some((idx, true)),
        });
        stack.push(Work {
            indices: left_set,
            patch: Some((idx, false)),
        });
    }

    IsolationTree { nodes }
}

/// Structural identity of a tree: preorder list of `(dim, left size)` for
/// internal nodes. Under the distinct-coordinates hypothesis the left set is
/// the `left size` smallest points along `dim`, so this pins the tree
/// exactly while marginalizing the continuous split value into its gap.
pub fn tree_signature(t: &IsolationTree) -> Vec<(usize, usize)> {
    fn subtree_size(nodes: &[Node], idx: usize) -> usize {
        match &nodes[idx] {
            Node::Internal { size, .. } => *size,
            Node::Leaf { members } => members.len(),
        }
    }
    let mut sig = Vec::new();
    let mut stack = vec![0usize];
    while let Some(idx) = stack.pop() {
        if let Node::Internal { dim, left, right, .. } = &t.nodes[idx] {
            sig.push((*dim, subtree_size(&t.nodes, *left)));
            stack.push(*right);
            stack.push(*left);
        }
    }
    sig
}

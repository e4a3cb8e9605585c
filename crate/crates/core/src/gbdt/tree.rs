//! Single regression tree: arena representation, prediction, and greedy
//! second-order split finding.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::features::{FeatureMatrix, MISSING};

/// A node in the arena. Split thresholds route `x < threshold` left and
/// `x >= threshold` right; the sentinel `-1` ("missing") follows the learned
/// default direction instead of being compared numerically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        missing_left: bool,
        left: usize,
        right: usize,
        /// Sum of training hessians routed through this node.
        cover: f64,
    },
    Leaf {
        value: f64,
        cover: f64,
    },
}

/// One regression tree. `nodes[0]` is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    /// Build from raw nodes; intended for tests and deserialization paths.
    pub fn from_nodes(nodes: Vec<Node>) -> Tree {
        Tree { nodes }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn leaf_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { value, .. } => Some(*value),
            _ => None,
        })
    }

    /// Walk the tree for one feature row. Total: every row reaches a leaf.
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut idx = 0usize;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { value, .. } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    missing_left,
                    left,
                    right,
                    ..
                } => {
                    let x = row[*feature];
                    idx = if x == MISSING {
                        if *missing_left {
                            *left
                        } else {
                            *right
                        }
                    } else if x < *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    /// Cover-weighted mean leaf value: the tree's output expectation under
    /// the training distribution. Used as the attribution base value.
    pub fn expected_value(&self) -> f64 {
        self.expected_value_at(0)
    }

    fn expected_value_at(&self, idx: usize) -> f64 {
        match &self.nodes[idx] {
            Node::Leaf { value, .. } => *value,
            Node::Split {
                left, right, cover, ..
            } => {
                let (lc, rc) = (self.node_cover(*left), self.node_cover(*right));
                if *cover <= 0.0 {
                    0.5 * (self.expected_value_at(*left) + self.expected_value_at(*right))
                } else {
                    (lc * self.expected_value_at(*left) + rc * self.expected_value_at(*right))
                        / cover
                }
            }
        }
    }

    pub fn node_cover(&self, idx: usize) -> f64 {
        match &self.nodes[idx] {
            Node::Leaf { cover, .. } => *cover,
            Node::Split { cover, .. } => *cover,
        }
    }
}

/// Split-finding and leaf-weight hyperparameters for one tree.
pub(crate) struct TreeParams {
    pub gamma: f64,
    pub lambda: f64,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_child_hessian: f64,
}

#[derive(Debug, Clone, Copy)]
struct SplitCandidate {
    feature: usize,
    threshold: f64,
    missing_left: bool,
    gain: f64,
}

/// Strict total order on candidates: higher gain wins; ties prefer the lower
/// feature index, then the lower threshold, then missing-left. This keeps
/// training independent of evaluation order and thread count.
fn better(a: &SplitCandidate, b: &SplitCandidate) -> bool {
    if a.gain != b.gain {
        return a.gain > b.gain;
    }
    if a.feature != b.feature {
        return a.feature < b.feature;
    }
    if a.threshold != b.threshold {
        return a.threshold < b.threshold;
    }
    a.missing_left && !b.missing_left
}

pub(crate) struct TreeBuilder<'a> {
    pub features: &'a FeatureMatrix,
    pub grad: &'a [f64],
    pub hess: &'a [f64],
    pub columns: &'a [usize],
    pub params: TreeParams,
}

impl<'a> TreeBuilder<'a> {
    pub fn build(&self, rows: Vec<usize>) -> Tree {
        let mut nodes = Vec::new();
        self.build_node(&mut nodes, rows, 0);
        Tree { nodes }
    }

    fn sums(&self, rows: &[usize]) -> (f64, f64) {
        let mut g = 0.0;
        let mut h = 0.0;
        for &i in rows {
            g += self.grad[i];
            h += self.hess[i];
        }
        (g, h)
    }

    fn leaf_value(&self, g: f64, h: f64) -> f64 {
        let denom = h + self.params.lambda;
        if denom <= 0.0 {
            0.0
        } else {
            -g / denom * self.params.learning_rate
        }
    }

    fn build_node(&self, nodes: &mut Vec<Node>, rows: Vec<usize>, depth: usize) -> usize {
        let (g_sum, h_sum) = self.sums(&rows);
        let leaf = |nodes: &mut Vec<Node>| {
            let idx = nodes.len();
            nodes.push(Node::Leaf {
                value: self.leaf_value(g_sum, h_sum),
                cover: h_sum,
            });
            idx
        };

        if depth >= self.params.max_depth || rows.len() < 2 {
            return leaf(nodes);
        }
        let Some(split) = self.best_split(&rows, g_sum, h_sum) else {
            return leaf(nodes);
        };

        let mut left_rows = Vec::with_capacity(rows.len() / 2);
        let mut right_rows = Vec::with_capacity(rows.len() / 2);
        for &i in &rows {
            let x = self.features.get(i, split.feature);
            let goes_left = if x == MISSING {
                split.missing_left
            } else {
                x < split.threshold
            };
            if goes_left {
                left_rows.push(i);
            } else {
                right_rows.push(i);
            }
        }
        debug_assert!(!left_rows.is_empty() && !right_rows.is_empty());

        let idx = nodes.len();
        nodes.push(Node::Leaf { value: 0.0, cover: 0.0 }); // placeholder
        let left = self.build_node(nodes, left_rows, depth + 1);
        let right = self.build_node(nodes, right_rows, depth + 1);
        nodes[idx] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            missing_left: split.missing_left,
            left,
            right,
            cover: h_sum,
        };
        idx
    }

    /// Exact greedy enumeration over sorted unique present values of every
    /// candidate column, trying both default directions for missing rows.
    fn best_split(&self, rows: &[usize], g_total: f64, h_total: f64) -> Option<SplitCandidate> {
        let per_feature: Vec<Option<SplitCandidate>> = self
            .columns
            .par_iter()
            .map(|&f| self.best_split_for_feature(f, rows, g_total, h_total))
            .collect();

        let mut best: Option<SplitCandidate> = None;
        for cand in per_feature.into_iter().flatten() {
            best = match best {
                None => Some(cand),
                Some(b) if better(&cand, &b) => Some(cand),
                keep => keep,
            };
        }
        best.filter(|c| c.gain > 0.0)
    }

    fn best_split_for_feature(
        &self,
        feature: usize,
        rows: &[usize],
        g_total: f64,
        h_total: f64,
    ) -> Option<SplitCandidate> {
        let mut present: Vec<(f64, usize)> = Vec::with_capacity(rows.len());
        let mut g_missing = 0.0;
        let mut h_missing = 0.0;
        for &i in rows {
            let x = self.features.get(i, feature);
            if x == MISSING {
                g_missing += self.grad[i];
                h_missing += self.hess[i];
            } else {
                present.push((x, i));
            }
        }
        if present.len() < 2 {
            return None;
        }
        present.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let lambda = self.params.lambda;
        let score = |g: f64, h: f64| -> f64 {
            let denom = h + lambda;
            if denom <= 0.0 {
                0.0
            } else {
                g * g / denom
            }
        };
        let parent_score = score(g_total, h_total);

        let mut best: Option<SplitCandidate> = None;
        let mut g_left = 0.0;
        let mut h_left = 0.0;
        for k in 0..present.len() - 1 {
            g_left += self.grad[present[k].1];
            h_left += self.hess[present[k].1];
            let (v, v_next) = (present[k].0, present[k + 1].0);
            if v == v_next {
                continue;
            }
            let threshold = 0.5 * (v + v_next);
            for missing_left in [true, false] {
                let (gl, hl) = if missing_left {
                    (g_left + g_missing, h_left + h_missing)
                } else {
                    (g_left, h_left)
                };
                let (gr, hr) = (g_total - gl, h_total - hl);
                if hl < self.params.min_child_hessian || hr < self.params.min_child_hessian {
                    continue;
                }
                let gain = 0.5 * (score(gl, hl) + score(gr, hr) - parent_score) - self.params.gamma;
                if !gain.is_finite() {
                    continue;
                }
                let cand = SplitCandidate {
                    feature,
                    threshold,
                    missing_left,
                    gain,
                };
                best = match best {
                    None => Some(cand),
                    Some(b) if better(&cand, &b) => Some(cand),
                    keep => keep,
                };
            }
        }
        best
    }
}

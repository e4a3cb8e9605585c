//! From-scratch multiclass gradient-boosted decision trees.
//!
//! The learner minimizes a class-weighted softmax cross-entropy with leaf
//! regularization: each boosting round fits one tree per class against the
//! second-order expansion of the loss (gradient/hessian), using exact greedy
//! split enumeration over sorted unique values. The `-1` sentinel is treated
//! as a missing value and routed by a learned default direction, never
//! compared numerically.
//!
//! Training is deterministic: all randomness flows from the config seed, and
//! split selection uses a strict total order on (gain, feature, threshold)
//! so results do not depend on thread count.

mod tree;

pub use tree::{Node, Tree};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

/// Probabilities below this are clamped before taking logs.
pub const PROB_CLAMP: f64 = 1e-15;

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Per-leaf complexity penalty (gamma).
    pub gamma: f64,
    /// L2 shrinkage on leaf weights (lambda).
    pub lambda: f64,
    /// Step size applied to every leaf weight (eta).
    pub learning_rate: f64,
    pub max_depth: usize,
    pub rounds: usize,
    /// Minimum hessian sum on each side of a split.
    pub min_child_hessian: f64,
    /// Row fraction sampled per round; 1.0 disables subsampling.
    pub subsample: f64,
    /// Column fraction sampled per tree; 1.0 disables column sampling.
    pub colsample: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: 0.0,
            lambda: 1.0,
            learning_rate: 0.1,
            max_depth: 6,
            rounds: 100,
            min_child_hessian: 0.0,
            subsample: 1.0,
            colsample: 1.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gamma < 0.0 || !self.gamma.is_finite() {
            return Err(Error::InvalidConfig(format!("gamma {} must be >= 0", self.gamma)));
        }
        if self.lambda < 0.0 || !self.lambda.is_finite() {
            return Err(Error::InvalidConfig(format!("lambda {} must be >= 0", self.lambda)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate {} must be in (0, 1]",
                self.learning_rate
            )));
        }
        if self.max_depth < 1 {
            return Err(Error::InvalidConfig("max_depth must be >= 1".into()));
        }
        if self.rounds < 1 {
            return Err(Error::InvalidConfig("rounds must be >= 1".into()));
        }
        if self.min_child_hessian < 0.0 || !self.min_child_hessian.is_finite() {
            return Err(Error::InvalidConfig("min_child_hessian must be >= 0".into()));
        }
        for (name, v) in [("subsample", self.subsample), ("colsample", self.colsample)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::InvalidConfig(format!("{name} {v} must be in (0, 1]")));
            }
        }
        Ok(())
    }
}

/// A trained boosted ensemble: one tree per class per round over additive
/// margins, softmax on top.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub n_classes: usize,
    pub n_features: usize,
    pub base_scores: Vec<f64>,
    pub config: TrainConfig,
    /// `trees[round][class]`.
    trees: Vec<Vec<Tree>>,
}

const MODEL_FORMAT: &str = "gbdt-ensemble";
const MODEL_VERSION: u32 = 1;

/// On-disk model wrapper with a format/version stamp.
#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: TreeEnsemble,
}

impl TreeEnsemble {
    /// Assemble an ensemble from parts; used by tests and tools that build
    /// trees by hand.
    pub fn from_parts(
        n_classes: usize,
        n_features: usize,
        base_scores: Vec<f64>,
        trees: Vec<Vec<Tree>>,
        config: TrainConfig,
    ) -> Result<TreeEnsemble> {
        if n_classes < 2 {
            return Err(Error::InvalidConfig("need at least 2 classes".into()));
        }
        if base_scores.len() != n_classes {
            return Err(Error::InvalidConfig(
                "base_scores length must equal class count".into(),
            ));
        }
        if trees.iter().any(|round| round.len() != n_classes) {
            return Err(Error::InvalidConfig(
                "every round must hold one tree per class".into(),
            ));
        }
        Ok(TreeEnsemble {
            n_classes,
            n_features,
            base_scores,
            config,
            trees,
        })
    }

    pub fn rounds(&self) -> usize {
        self.trees.len()
    }

    pub fn trees(&self) -> &[Vec<Tree>] {
        &self.trees
    }

    fn check_arity(&self, row: &[f64]) -> Result<()> {
        if row.len() != self.n_features {
            return Err(Error::ArityMismatch {
                expected: self.n_features,
                got: row.len(),
            });
        }
        Ok(())
    }

    /// Raw additive margins using only the first `rounds` boosting rounds.
    pub fn staged_margins(&self, row: &[f64], rounds: usize) -> Result<Vec<f64>> {
        self.check_arity(row)?;
        let mut margins = self.base_scores.clone();
        for round in self.trees.iter().take(rounds) {
            for (c, tree) in round.iter().enumerate() {
                margins[c] += tree.predict(row);
            }
        }
        Ok(margins)
    }

    /// Raw additive margins (log-odds scale) for one row.
    pub fn predict_margins(&self, row: &[f64]) -> Result<Vec<f64>> {
        self.staged_margins(row, self.trees.len())
    }

    /// Class probabilities for one row; non-negative and summing to 1.
    pub fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.predict_margins(row)?))
    }

    /// Argmax class for one row; probability ties break to the lower index.
    pub fn predict_class(&self, row: &[f64]) -> Result<usize> {
        Ok(argmax(&self.predict_margins(row)?))
    }

    /// Batch probabilities, parallel over rows.
    pub fn predict_proba_batch(&self, features: &FeatureMatrix) -> Result<Vec<Vec<f64>>> {
        if features.n_cols() != self.n_features {
            return Err(Error::ArityMismatch {
                expected: self.n_features,
                got: features.n_cols(),
            });
        }
        Ok((0..features.n_rows())
            .into_par_iter()
            .map(|i| softmax(&self.predict_margins(features.row(i)).expect("arity checked")))
            .collect())
    }

    /// Versioned JSON serialization; round-trips bit-exactly.
    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            model: self.clone(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<TreeEnsemble> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != MODEL_FORMAT {
            return Err(Error::Model(format!("unexpected model format '{}'", file.format)));
        }
        if file.version != MODEL_VERSION {
            return Err(Error::Model(format!(
                "unsupported model version {}",
                file.version
            )));
        }
        Ok(file.model)
    }
}

/// Numerically stable softmax.
pub fn softmax(margins: &[f64]) -> Vec<f64> {
    let max = margins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = margins.iter().map(|&m| (m - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

/// Index of the maximum value; ties break to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Outcome of the weighted cross-entropy evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue {
    pub value: f64,
    /// True when any true-label probability hit the clamp floor.
    pub clamped: bool,
}

/// Class-weighted cross entropy over flat `N x C` probabilities:
/// `-(1/N) * sum_i (1/n_{y_i}) * ln p_{i, y_i}`.
pub fn weighted_ce_loss(
    probs: &[f64],
    n_classes: usize,
    labels: &[usize],
    class_counts: &[usize],
) -> Result<LossValue> {
    let n = labels.len();
    if probs.len() != n * n_classes {
        return Err(Error::ArityMismatch {
            expected: n * n_classes,
            got: probs.len(),
        });
    }
    if class_counts.len() != n_classes {
        return Err(Error::ArityMismatch {
            expected: n_classes,
            got: class_counts.len(),
        });
    }
    if n == 0 {
        return Err(Error::Degenerate("empty loss input".into()));
    }
    let mut total = 0.0;
    let mut clamped = false;
    for (i, &y) in labels.iter().enumerate() {
        if y >= n_classes {
            return Err(Error::InvalidData(format!("label {y} out of range")));
        }
        if class_counts[y] == 0 {
            return Err(Error::InvalidData(format!(
                "class {y} present in labels but has zero count"
            )));
        }
        let row = &probs[i * n_classes..(i + 1) * n_classes];
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidData(format!(
                "probability row {i} sums to {sum}, expected 1"
            )));
        }
        let mut p = row[y];
        if p < PROB_CLAMP {
            p = PROB_CLAMP;
            clamped = true;
        }
        total += p.ln() / class_counts[y] as f64;
    }
    Ok(LossValue {
        value: -total / n as f64,
        clamped,
    })
}

/// Gradient and diagonal hessian of the weighted softmax cross entropy with
/// respect to the raw margins. For sample i with weight `w =
/// class_weights[y_i]`: `g = w * (p_c - [c == y_i])`, `h = w * p_c * (1 -
/// p_c)`. Both outputs are flat `N x C`.
pub fn softmax_grad_hess(
    margins: &[f64],
    n_classes: usize,
    labels: &[usize],
    class_weights: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let n = labels.len();
    debug_assert_eq!(margins.len(), n * n_classes);
    debug_assert_eq!(class_weights.len(), n_classes);
    let mut grad = vec![0.0; n * n_classes];
    let mut hess = vec![0.0; n * n_classes];
    grad.par_chunks_mut(n_classes)
        .zip(hess.par_chunks_mut(n_classes))
        .enumerate()
        .for_each(|(i, (g_row, h_row))| {
            let p = softmax(&margins[i * n_classes..(i + 1) * n_classes]);
            let w = class_weights[labels[i]];
            for c in 0..n_classes {
                let indicator = if c == labels[i] { 1.0 } else { 0.0 };
                g_row[c] = w * (p[c] - indicator);
                h_row[c] = w * p[c] * (1.0 - p[c]);
            }
        });
    (grad, hess)
}

/// Per-class sample counts; errors if any class in `0..n_classes` is absent.
pub fn class_counts(labels: &[usize], n_classes: usize) -> Result<Vec<usize>> {
    let mut counts = vec![0usize; n_classes];
    for &y in labels {
        if y >= n_classes {
            return Err(Error::InvalidData(format!(
                "label {y} out of range for {n_classes} classes"
            )));
        }
        counts[y] += 1;
    }
    if let Some(missing) = counts.iter().position(|&c| c == 0) {
        return Err(Error::ClassMissing(missing));
    }
    Ok(counts)
}

/// Train a boosted ensemble. Per-sample weights are `1/n_c` of the sample's
/// class, so rare classes are not drowned out. Base scores start at zero.
pub fn train(
    features: &FeatureMatrix,
    labels: &[usize],
    n_classes: usize,
    config: &TrainConfig,
) -> Result<TreeEnsemble> {
    config.validate()?;
    let n = features.n_rows();
    if labels.len() != n {
        return Err(Error::ArityMismatch {
            expected: n,
            got: labels.len(),
        });
    }
    if n_classes < 2 {
        return Err(Error::Degenerate(
            "training needs at least 2 classes".into(),
        ));
    }
    if n < n_classes {
        return Err(Error::Degenerate(format!(
            "need at least {n_classes} samples, got {n}"
        )));
    }
    for (i, row) in features.rows_iter().enumerate() {
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!("non-finite feature in row {i}")));
        }
    }
    let counts = class_counts(labels, n_classes)?;
    let class_weights: Vec<f64> = counts.iter().map(|&c| 1.0 / c as f64).collect();

    let n_features = features.n_cols();
    let base_scores = vec![0.0; n_classes];
    let mut margins = vec![0.0; n * n_classes];
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut trees: Vec<Vec<Tree>> = Vec::with_capacity(config.rounds);

    let all_rows: Vec<usize> = (0..n).collect();
    let all_cols: Vec<usize> = (0..n_features).collect();

    for _round in 0..config.rounds {
        let (grad, hess) = softmax_grad_hess(&margins, n_classes, labels, &class_weights);

        let rows: Vec<usize> = if config.subsample < 1.0 {
            let take = ((n as f64 * config.subsample).floor() as usize).max(1);
            let mut shuffled = all_rows.clone();
            shuffled.shuffle(&mut rng);
            let mut sample = shuffled[..take].to_vec();
            sample.sort_unstable();
            sample
        } else {
            all_rows.clone()
        };

        let mut round_trees = Vec::with_capacity(n_classes);
        for c in 0..n_classes {
            let cols: Vec<usize> = if config.colsample < 1.0 {
                let take = ((n_features as f64 * config.colsample).floor() as usize).max(1);
                let mut shuffled = all_cols.clone();
                shuffled.shuffle(&mut rng);
                let mut sample = shuffled[..take].to_vec();
                sample.sort_unstable();
                sample
            } else {
                all_cols.clone()
            };

            // Column views of the flat N x C gradient/hessian.
            let g_col: Vec<f64> = (0..n).map(|i| grad[i * n_classes + c]).collect();
            let h_col: Vec<f64> = (0..n).map(|i| hess[i * n_classes + c]).collect();
            let builder = tree::TreeBuilder {
                features,
                grad: &g_col,
                hess: &h_col,
                columns: &cols,
                params: tree::TreeParams {
                    gamma: config.gamma,
                    lambda: config.lambda,
                    learning_rate: config.learning_rate,
                    max_depth: config.max_depth,
                    min_child_hessian: config.min_child_hessian,
                },
            };
            let tree = builder.build(rows.clone());

            let updates: Vec<f64> = (0..n)
                .into_par_iter()
                .map(|i| tree.predict(features.row(i)))
                .collect();
            for (i, u) in updates.into_iter().enumerate() {
                margins[i * n_classes + c] += u;
            }
            round_trees.push(tree);
        }
        trees.push(round_trees);
    }

    Ok(TreeEnsemble {
        n_classes,
        n_features,
        base_scores,
        config: config.clone(),
        trees,
    })
}

/// Seeded stratified split: per class, a shuffled `val_fraction` share goes
/// to validation (at least one sample stays in each part when the class has
/// two or more samples).
pub fn stratified_split(
    labels: &[usize],
    n_classes: usize,
    val_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&val_fraction) {
        return Err(Error::InvalidConfig(format!(
            "val_fraction {val_fraction} must be in [0, 1)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_idx = Vec::new();
    let mut val_idx = Vec::new();
    for c in 0..n_classes {
        let mut members: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, &y)| y == c)
            .map(|(i, _)| i)
            .collect();
        members.shuffle(&mut rng);
        let n_c = members.len();
        let mut n_val = (n_c as f64 * val_fraction).round() as usize;
        if n_c >= 2 {
            n_val = n_val.clamp(if val_fraction > 0.0 { 1 } else { 0 }, n_c - 1);
        } else {
            n_val = 0;
        }
        val_idx.extend_from_slice(&members[..n_val]);
        train_idx.extend_from_slice(&members[n_val..]);
    }
    train_idx.sort_unstable();
    val_idx.sort_unstable();
    Ok((train_idx, val_idx))
}

/// Grid search outcome: best configuration plus the per-candidate scores.
#[derive(Debug, Clone)]
pub struct GridSearchOutcome {
    pub best_index: usize,
    pub best_config: TrainConfig,
    pub scores: Vec<f64>,
}

/// Evaluate every candidate on a seeded stratified train/validation split
/// and return the config maximizing the metric. Ties break to the earliest
/// grid entry.
pub fn grid_search<M>(
    features: &FeatureMatrix,
    labels: &[usize],
    n_classes: usize,
    grid: &[TrainConfig],
    val_fraction: f64,
    seed: u64,
    metric: M,
) -> Result<GridSearchOutcome>
where
    M: Fn(&TreeEnsemble, &FeatureMatrix, &[usize]) -> f64,
{
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty hyperparameter grid".into()));
    }
    let (train_idx, val_idx) = stratified_split(labels, n_classes, val_fraction, seed)?;
    let train_x = features.subset(&train_idx);
    let train_y: Vec<usize> = train_idx.iter().map(|&i| labels[i]).collect();
    let val_x = features.subset(&val_idx);
    let val_y: Vec<usize> = val_idx.iter().map(|&i| labels[i]).collect();

    let mut scores = Vec::with_capacity(grid.len());
    for candidate in grid {
        let model = train(&train_x, &train_y, n_classes, candidate)?;
        scores.push(metric(&model, &val_x, &val_y));
    }
    // Strict '>' keeps the earliest winner on ties.
    let mut best_index = 0;
    for (k, &s) in scores.iter().enumerate() {
        if s > scores[best_index] {
            best_index = k;
        }
    }
    Ok(GridSearchOutcome {
        best_index,
        best_config: grid[best_index].clone(),
        scores,
    })
}

/// Plain accuracy of argmax predictions; the default grid-search metric.
pub fn accuracy_metric(model: &TreeEnsemble, features: &FeatureMatrix, labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let correct = features
        .rows_iter()
        .zip(labels)
        .filter(|(row, &y)| model.predict_class(row).map(|c| c == y).unwrap_or(false))
        .count();
    correct as f64 / labels.len() as f64
}

#[cfg(test)]
mod tests;

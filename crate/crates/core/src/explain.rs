//! Per-feature attribution for trained tree ensembles.
//!
//! [`tree_shap`] computes exact path-dependent Shapley values on the margin
//! (log-odds) scale, where contributions are additive: per class, the
//! feature contributions plus the base value reconstruct the raw margin
//! exactly. Conditioning uses training covers (hessian sums), the standard
//! tree-Shapley formulation. [`permutation_importance`] is a cheap
//! model-agnostic cross-check.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, MISSING};
use crate::gbdt::{Node, Tree, TreeEnsemble};

/// Shapley attribution of one row: `per_class[c][f]` plus `base[c]` sum to
/// the class-c margin.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapValues {
    pub per_class: Vec<Vec<f64>>,
    pub base: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct PathElement {
    feature: usize,
    zero_fraction: f64,
    one_fraction: f64,
    pweight: f64,
}

/// Sentinel for the root path element; never matches a real feature index.
const ROOT_FEATURE: usize = usize::MAX;

fn extend_path(path: &mut Vec<PathElement>, zero_fraction: f64, one_fraction: f64, feature: usize) {
    let depth = path.len();
    path.push(PathElement {
        feature,
        zero_fraction,
        one_fraction,
        pweight: if depth == 0 { 1.0 } else { 0.0 },
    });
    for i in (0..depth).rev() {
        path[i + 1].pweight +=
            one_fraction * path[i].pweight * (i + 1) as f64 / (depth + 1) as f64;
        path[i].pweight =
            zero_fraction * path[i].pweight * (depth - i) as f64 / (depth + 1) as f64;
    }
}

fn unwind_path(path: &mut Vec<PathElement>, index: usize) {
    let depth = path.len() - 1;
    let one_fraction = path[index].one_fraction;
    let zero_fraction = path[index].zero_fraction;
    let mut next_one = path[depth].pweight;
    for i in (0..depth).rev() {
        if one_fraction != 0.0 {
            let tmp = path[i].pweight;
            path[i].pweight = next_one * (depth + 1) as f64 / ((i + 1) as f64 * one_fraction);
            next_one = tmp - path[i].pweight * zero_fraction * (depth - i) as f64 / (depth + 1) as f64;
        } else {
            path[i].pweight =
                path[i].pweight * (depth + 1) as f64 / (zero_fraction * (depth - i) as f64);
        }
    }
    for i in index..depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero_fraction = path[i + 1].zero_fraction;
        path[i].one_fraction = path[i + 1].one_fraction;
    }
    path.pop();
}

fn unwound_path_sum(path: &[PathElement], index: usize) -> f64 {
    let depth = path.len() - 1;
    let one_fraction = path[index].one_fraction;
    let zero_fraction = path[index].zero_fraction;
    let mut next_one = path[depth].pweight;
    let mut total = 0.0;
    for i in (0..depth).rev() {
        if one_fraction != 0.0 {
            let tmp = next_one * (depth + 1) as f64 / ((i + 1) as f64 * one_fraction);
            total += tmp;
            next_one = path[i].pweight - tmp * zero_fraction * (depth - i) as f64 / (depth + 1) as f64;
        } else if zero_fraction != 0.0 {
            total += path[i].pweight / zero_fraction * (depth + 1) as f64 / (depth - i) as f64;
        } else {
            debug_assert_eq!(path[i].pweight, 0.0, "zero-weight path element expected");
        }
    }
    total
}

fn shap_recurse(
    tree: &Tree,
    row: &[f64],
    phi: &mut [f64],
    node_idx: usize,
    mut path: Vec<PathElement>,
    parent_zero: f64,
    parent_one: f64,
    parent_feature: usize,
) {
    extend_path(&mut path, parent_zero, parent_one, parent_feature);
    match &tree.nodes()[node_idx] {
        Node::Leaf { value, .. } => {
            for i in 1..path.len() {
                let w = unwound_path_sum(&path, i);
                phi[path[i].feature] +=
                    w * (path[i].one_fraction - path[i].zero_fraction) * value;
            }
        }
        Node::Split {
            feature,
            threshold,
            missing_left,
            left,
            right,
            cover,
        } => {
            let x = row[*feature];
            let hot = if x == MISSING {
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
            let cold = if hot == *left { *right } else { *left };

            // A feature already on the path is unwound first; its fractions
            // carry into the children.
            let mut incoming_zero = 1.0;
            let mut incoming_one = 1.0;
            if let Some(k) = path.iter().position(|e| e.feature == *feature) {
                incoming_zero = path[k].zero_fraction;
                incoming_one = path[k].one_fraction;
                unwind_path(&mut path, k);
            }

            let hot_zero = tree.node_cover(hot) / cover * incoming_zero;
            let cold_zero = tree.node_cover(cold) / cover * incoming_zero;
            shap_recurse(tree, row, phi, hot, path.clone(), hot_zero, incoming_one, *feature);
            shap_recurse(tree, row, phi, cold, path, cold_zero, 0.0, *feature);
        }
    }
}

/// Shapley contributions of one tree, accumulated into `phi`.
fn tree_contributions(tree: &Tree, row: &[f64], phi: &mut [f64]) {
    if matches!(tree.nodes()[0], Node::Leaf { .. }) {
        // A stump uses no features: everything sits in the expectation.
        return;
    }
    shap_recurse(tree, row, phi, 0, Vec::new(), 1.0, 1.0, ROOT_FEATURE);
}

/// Exact path-dependent tree-Shapley values for one row, per class, on the
/// margin scale. `sum(phi) + base = margin` per class.
pub fn tree_shap(ensemble: &TreeEnsemble, row: &[f64]) -> Result<ShapValues> {
    if row.len() != ensemble.n_features {
        return Err(Error::ArityMismatch {
            expected: ensemble.n_features,
            got: row.len(),
        });
    }
    let mut per_class = vec![vec![0.0; ensemble.n_features]; ensemble.n_classes];
    let mut base = ensemble.base_scores.clone();
    for round in ensemble.trees() {
        for (c, tree) in round.iter().enumerate() {
            base[c] += tree.expected_value();
            tree_contributions(tree, row, &mut per_class[c]);
        }
    }
    Ok(ShapValues { per_class, base })
}

/// One row of the ranked attribution table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionRow {
    pub class: String,
    pub feature: String,
    pub group: String,
    pub mean_abs_shap: f64,
    pub rank: usize,
}

/// Mean absolute Shapley value over a dataset, per class, sorted descending
/// with 1-based ranks. `groups` tags each feature with its family
/// (spatiotemporal / jobs-housing / purpose / ...).
pub fn mean_abs_shap(
    ensemble: &TreeEnsemble,
    data: &FeatureMatrix,
    class_names: &[String],
    feature_names: &[&str],
    groups: &[&str],
) -> Result<Vec<AttributionRow>> {
    if data.is_empty() {
        return Err(Error::Degenerate("empty attribution dataset".into()));
    }
    if feature_names.len() != ensemble.n_features || groups.len() != ensemble.n_features {
        return Err(Error::ArityMismatch {
            expected: ensemble.n_features,
            got: feature_names.len().min(groups.len()),
        });
    }
    if class_names.len() != ensemble.n_classes {
        return Err(Error::ArityMismatch {
            expected: ensemble.n_classes,
            got: class_names.len(),
        });
    }

    let per_row: Vec<Vec<Vec<f64>>> = (0..data.n_rows())
        .into_par_iter()
        .map(|i| tree_shap(ensemble, data.row(i)).map(|s| s.per_class))
        .collect::<Result<_>>()?;

    let n = data.n_rows() as f64;
    let mut rows = Vec::new();
    for c in 0..ensemble.n_classes {
        let mut means: Vec<(usize, f64)> = (0..ensemble.n_features)
            .map(|f| {
                let total: f64 = per_row.iter().map(|shap| shap[c][f].abs()).sum();
                (f, total / n)
            })
            .collect();
        means.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        for (rank, (f, value)) in means.into_iter().enumerate() {
            rows.push(AttributionRow {
                class: class_names[c].clone(),
                feature: feature_names[f].to_string(),
                group: groups[f].to_string(),
                mean_abs_shap: value,
                rank: rank + 1,
            });
        }
    }
    Ok(rows)
}

/// Write the attribution table: `class,feature,group,mean_abs_shap,rank`.
pub fn write_attribution_csv<W: std::io::Write>(
    writer: W,
    rows: &[AttributionRow],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["class", "feature", "group", "mean_abs_shap", "rank"])?;
    for r in rows {
        w.write_record([
            r.class.as_str(),
            r.feature.as_str(),
            r.group.as_str(),
            &format!("{:.6}", r.mean_abs_shap),
            &r.rank.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Mean metric drop over seeded column shuffles: shuffle one feature column,
/// re-evaluate, and average `base - shuffled` over `repeats`.
pub fn permutation_importance<M>(
    ensemble: &TreeEnsemble,
    data: &FeatureMatrix,
    labels: &[usize],
    metric: M,
    repeats: usize,
    seed: u64,
) -> Result<Vec<f64>>
where
    M: Fn(&TreeEnsemble, &FeatureMatrix, &[usize]) -> f64 + Sync,
{
    if repeats == 0 {
        return Err(Error::InvalidConfig("repeats must be >= 1".into()));
    }
    if data.n_rows() != labels.len() {
        return Err(Error::ArityMismatch {
            expected: data.n_rows(),
            got: labels.len(),
        });
    }
    let base = metric(ensemble, data, labels);
    let n = data.n_rows();
    let drops: Vec<f64> = (0..ensemble.n_features)
        .into_par_iter()
        .map(|f| {
            let mut total = 0.0;
            for rep in 0..repeats {
                // Independent stream per (feature, repeat) keeps results
                // stable under parallel scheduling.
                let mut rng =
                    ChaCha8Rng::seed_from_u64(seed ^ ((f as u64) << 20) ^ rep as u64);
                let mut perm: Vec<usize> = (0..n).collect();
                perm.shuffle(&mut rng);
                let mut shuffled = data.clone();
                for (i, &src) in perm.iter().enumerate() {
                    shuffled.set(i, f, data.get(src, f));
                }
                total += base - metric(ensemble, &shuffled, labels);
            }
            total / repeats as f64
        })
        .collect();
    Ok(drops)
}

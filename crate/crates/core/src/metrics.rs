//! Classification and clustering evaluation.
//!
//! Classification metrics follow the one-vs-rest convention with
//! support-weighted aggregates. Clustering quality on unlabeled data is
//! scored with the Silhouette coefficient (higher is better) and the
//! Davies-Bouldin index (lower is better); by convention those run on
//! z-score standardized features with predicted labels as clusters, so one
//! large-scale column cannot dominate the distances.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

/// Default Silhouette subsample cap; the pairwise pass is O(n^2).
pub const DEFAULT_SILHOUETTE_CAP: usize = 10_000;

/// C x C confusion counts; rows are true classes, columns predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub class_names: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    /// True-class supports (row sums).
    pub fn supports(&self) -> Vec<usize> {
        self.counts.iter().map(|row| row.iter().sum()).collect()
    }
}

/// One-vs-rest metrics for a single class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub support: usize,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    /// Set when tp + fp = 0 and precision was reported as 0.
    pub precision_undefined: bool,
}

/// Full evaluation of hard predictions against true labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub per_class: Vec<ClassMetrics>,
    pub confusion: ConfusionMatrix,
    /// Support-weighted aggregates over per-class metrics.
    pub weighted_accuracy: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    /// Fraction of samples predicted exactly right. Equals weighted recall.
    pub micro_accuracy: f64,
    pub flags: Vec<String>,
}

/// Compute per-class and support-weighted classification metrics.
pub fn classification_report(
    y_true: &[usize],
    y_pred: &[usize],
    class_names: &[String],
) -> Result<ClassificationReport> {
    if y_true.len() != y_pred.len() {
        return Err(Error::ArityMismatch {
            expected: y_true.len(),
            got: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(Error::Degenerate("empty label lists".into()));
    }
    let c = class_names.len();
    let mut counts = vec![vec![0usize; c]; c];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t >= c || p >= c {
            return Err(Error::InvalidData(format!(
                "label out of range: true {t}, pred {p}, classes {c}"
            )));
        }
        counts[t][p] += 1;
    }
    let n = y_true.len();
    let mut per_class = Vec::with_capacity(c);
    let mut flags = Vec::new();
    for k in 0..c {
        let tp = counts[k][k];
        let fp: usize = (0..c).filter(|&t| t != k).map(|t| counts[t][k]).sum();
        let fn_: usize = (0..c).filter(|&p| p != k).map(|p| counts[k][p]).sum();
        let tn = n - tp - fp - fn_;
        let support = tp + fn_;
        let precision_undefined = tp + fp == 0;
        if precision_undefined {
            flags.push(format!(
                "precision undefined for class {} (no predictions); reported as 0",
                class_names[k]
            ));
        }
        per_class.push(ClassMetrics {
            class: class_names[k].clone(),
            support,
            tp,
            fp,
            fn_,
            tn,
            accuracy: (tp + tn) as f64 / n as f64,
            precision: if precision_undefined {
                0.0
            } else {
                tp as f64 / (tp + fp) as f64
            },
            recall: if support == 0 {
                0.0
            } else {
                tp as f64 / support as f64
            },
            precision_undefined,
        });
    }

    let weighted = |metric: fn(&ClassMetrics) -> f64| -> f64 {
        per_class
            .iter()
            .map(|m| metric(m) * m.support as f64)
            .sum::<f64>()
            / n as f64
    };
    let micro = y_true
        .iter()
        .zip(y_pred)
        .filter(|(t, p)| t == p)
        .count() as f64
        / n as f64;

    Ok(ClassificationReport {
        weighted_accuracy: weighted(|m| m.accuracy),
        weighted_precision: weighted(|m| m.precision),
        weighted_recall: weighted(|m| m.recall),
        micro_accuracy: micro,
        per_class,
        confusion: ConfusionMatrix {
            class_names: class_names.to_vec(),
            counts,
        },
        flags,
    })
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn cluster_members(labels: &[usize]) -> Vec<(usize, Vec<usize>)> {
    let max = labels.iter().copied().max().unwrap_or(0);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); max + 1];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    members
        .into_iter()
        .enumerate()
        .filter(|(_, m)| !m.is_empty())
        .collect()
}

/// Mean Silhouette coefficient with Euclidean distance. Singleton clusters
/// score 0; coincident points (a = b = 0) score 0. When the input exceeds
/// `cap`, a seeded uniform subsample of `cap` points is scored instead.
pub fn silhouette(
    points: &FeatureMatrix,
    labels: &[usize],
    cap: usize,
    seed: u64,
) -> Result<f64> {
    if points.n_rows() != labels.len() {
        return Err(Error::ArityMismatch {
            expected: points.n_rows(),
            got: labels.len(),
        });
    }
    let (sub_points, sub_labels);
    let (points, labels) = if points.n_rows() > cap && cap > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx: Vec<usize> = (0..points.n_rows()).collect();
        idx.shuffle(&mut rng);
        idx.truncate(cap);
        idx.sort_unstable();
        sub_points = points.subset(&idx);
        sub_labels = idx.iter().map(|&i| labels[i]).collect::<Vec<_>>();
        (&sub_points, sub_labels.as_slice())
    } else {
        (points, labels)
    };

    let members = cluster_members(labels);
    if members.len() < 2 {
        return Err(Error::Degenerate(
            "silhouette needs at least 2 non-empty clusters".into(),
        ));
    }
    let scores: Vec<f64> = (0..points.n_rows())
        .into_par_iter()
        .map(|i| {
            let own = labels[i];
            let row = points.row(i);
            let mut a = 0.0;
            let mut b = f64::INFINITY;
            for (cluster, idxs) in &members {
                let mut sum = 0.0;
                for &j in idxs {
                    if j != i {
                        sum += euclidean(row, points.row(j));
                    }
                }
                if *cluster == own {
                    if idxs.len() > 1 {
                        a = sum / (idxs.len() - 1) as f64;
                    } else {
                        // singleton: conventionally s(i) = 0, encoded below
                        a = f64::NAN;
                    }
                } else {
                    b = b.min(sum / idxs.len() as f64);
                }
            }
            if a.is_nan() {
                return 0.0;
            }
            let denom = a.max(b);
            if denom == 0.0 {
                0.0
            } else {
                (b - a) / denom
            }
        })
        .collect();
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Davies-Bouldin index: mean over clusters of the worst-case ratio of
/// summed within-cluster scatter to centroid separation. Lower is better.
pub fn davies_bouldin(points: &FeatureMatrix, labels: &[usize]) -> Result<f64> {
    if points.n_rows() != labels.len() {
        return Err(Error::ArityMismatch {
            expected: points.n_rows(),
            got: labels.len(),
        });
    }
    let members = cluster_members(labels);
    let k = members.len();
    if k < 2 {
        return Err(Error::Degenerate(
            "davies_bouldin needs at least 2 non-empty clusters".into(),
        ));
    }
    let dim = points.n_cols();
    let mut centroids = vec![vec![0.0; dim]; k];
    for (slot, (_, idxs)) in members.iter().enumerate() {
        for &i in idxs {
            for (d, v) in points.row(i).iter().enumerate() {
                centroids[slot][d] += v;
            }
        }
        for v in centroids[slot].iter_mut() {
            *v /= idxs.len() as f64;
        }
    }
    let scatter: Vec<f64> = members
        .iter()
        .enumerate()
        .map(|(slot, (_, idxs))| {
            idxs.iter()
                .map(|&i| euclidean(points.row(i), &centroids[slot]))
                .sum::<f64>()
                / idxs.len() as f64
        })
        .collect();

    let mut total = 0.0;
    for i in 0..k {
        let mut worst: f64 = 0.0;
        for j in 0..k {
            if i == j {
                continue;
            }
            let d = euclidean(&centroids[i], &centroids[j]);
            if d == 0.0 {
                return Err(Error::Degenerate(
                    "degenerate centroids: two clusters share a centroid".into(),
                ));
            }
            worst = worst.max((scatter[i] + scatter[j]) / d);
        }
        total += worst;
    }
    Ok(total / k as f64)
}

/// Column-wise z-score standardization; constant columns become all zeros.
pub fn standardize(points: &FeatureMatrix) -> FeatureMatrix {
    let n = points.n_rows();
    let cols = points.n_cols();
    if n == 0 {
        return points.clone();
    }
    let mut mean = vec![0.0; cols];
    for row in points.rows_iter() {
        for (d, v) in row.iter().enumerate() {
            mean[d] += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let mut var = vec![0.0; cols];
    for row in points.rows_iter() {
        for (d, v) in row.iter().enumerate() {
            var[d] += (v - mean[d]) * (v - mean[d]);
        }
    }
    let std: Vec<f64> = var.iter().map(|v| (v / n as f64).sqrt()).collect();

    let mut out = FeatureMatrix::new(cols);
    let mut buf = vec![0.0; cols];
    for row in points.rows_iter() {
        for d in 0..cols {
            buf[d] = if std[d] > 0.0 {
                (row[d] - mean[d]) / std[d]
            } else {
                0.0
            };
        }
        out.push_row(&buf).expect("same arity");
    }
    out
}

/// Combined clustering score used to judge transfer quality on unlabeled
/// data: Silhouette up, Davies-Bouldin down.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterScore {
    pub silhouette: f64,
    pub db_index: f64,
}

impl ClusterScore {
    /// Worst possible score; used when a clustering is degenerate (e.g. a
    /// model collapsed to a single predicted class).
    pub fn worst() -> ClusterScore {
        ClusterScore {
            silhouette: -1.0,
            db_index: f64::INFINITY,
        }
    }

    /// Strict improvement over `other`: Silhouette takes precedence; on
    /// equal Silhouette a strictly lower Davies-Bouldin wins.
    pub fn improves_on(&self, other: &ClusterScore) -> bool {
        if self.silhouette != other.silhouette {
            return self.silhouette > other.silhouette;
        }
        self.db_index < other.db_index
    }
}

/// Score predicted labels as clusters over z-scored features. Degenerate
/// clusterings (fewer than 2 classes actually predicted, or coincident
/// centroids) map to the worst score rather than erroring, so a collapsing
/// model is simply never selected.
pub fn transfer_score(
    features: &FeatureMatrix,
    labels: &[usize],
    cap: usize,
    seed: u64,
) -> ClusterScore {
    let standardized = standardize(features);
    let sil = silhouette(&standardized, labels, cap, seed);
    let db = davies_bouldin(&standardized, labels);
    match (sil, db) {
        (Ok(s), Ok(d)) => ClusterScore {
            silhouette: s,
            db_index: d,
        },
        _ => ClusterScore::worst(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i}")).collect()
    }

    #[test]
    fn perfect_predictions_score_one() {
        let y = vec![0, 1, 2, 1, 0];
        let report = classification_report(&y, &y, &names(3)).unwrap();
        assert_eq!(report.micro_accuracy, 1.0);
        assert_eq!(report.weighted_recall, 1.0);
        assert_eq!(report.weighted_precision, 1.0);
        for m in &report.per_class {
            assert_eq!(m.accuracy, 1.0);
        }
    }

    #[test]
    fn weighted_recall_hand_case() {
        // Supports 90 and 10 with recalls 0.9 and 0.5 -> weighted 0.86.
        let mut y_true = vec![0usize; 90];
        y_true.extend(vec![1usize; 10]);
        let mut y_pred = vec![0usize; 81];
        y_pred.extend(vec![1usize; 9]); // class 0: 81 right, 9 wrong
        y_pred.extend(vec![1usize; 5]); // class 1: 5 right, 5 wrong
        y_pred.extend(vec![0usize; 5]);
        let report = classification_report(&y_true, &y_pred, &names(2)).unwrap();
        assert!((report.per_class[0].recall - 0.9).abs() < 1e-12);
        assert!((report.per_class[1].recall - 0.5).abs() < 1e-12);
        assert!((report.weighted_recall - 0.86).abs() < 1e-12);
    }

    #[test]
    fn weighted_recall_equals_micro_accuracy() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let n = rng.gen_range(5..200);
            let c = rng.gen_range(2..6);
            let y_true: Vec<usize> = (0..n).map(|_| rng.gen_range(0..c)).collect();
            let y_pred: Vec<usize> = (0..n).map(|_| rng.gen_range(0..c)).collect();
            let report = classification_report(&y_true, &y_pred, &names(c)).unwrap();
            assert!(
                (report.weighted_recall - report.micro_accuracy).abs() < 1e-12,
                "algebraic identity must hold exactly"
            );
        }
    }

    #[test]
    fn confusion_rows_sum_to_supports() {
        let y_true = vec![0, 0, 1, 2, 2, 2];
        let y_pred = vec![0, 1, 1, 2, 0, 2];
        let report = classification_report(&y_true, &y_pred, &names(3)).unwrap();
        assert_eq!(report.confusion.supports(), vec![2, 1, 3]);
        assert_eq!(report.confusion.total(), 6);
    }

    #[test]
    fn undefined_precision_flagged() {
        let y_true = vec![0, 1];
        let y_pred = vec![0, 0];
        let report = classification_report(&y_true, &y_pred, &names(2)).unwrap();
        assert!(report.per_class[1].precision_undefined);
        assert_eq!(report.per_class[1].precision, 0.0);
        assert_eq!(report.flags.len(), 1);
    }

    #[test]
    fn length_mismatch_errors() {
        assert!(classification_report(&[0, 1], &[0], &names(2)).is_err());
    }

    fn duplicated_clusters() -> (FeatureMatrix, Vec<usize>) {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..5 {
            rows.push(vec![0.0, 0.0]);
            labels.push(0);
            rows.push(vec![100.0, 100.0]);
            labels.push(1);
        }
        (FeatureMatrix::from_rows(rows).unwrap(), labels)
    }

    #[test]
    fn tight_far_clusters_score_one() {
        let (points, labels) = duplicated_clusters();
        let s = silhouette(&points, &labels, 0, 0).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_points_score_zero() {
        let rows = vec![vec![1.0, 1.0]; 6];
        let points = FeatureMatrix::from_rows(rows).unwrap();
        let labels = vec![0, 1, 0, 1, 0, 1];
        let s = silhouette(&points, &labels, 0, 0).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn single_cluster_errors() {
        let points = FeatureMatrix::from_rows(vec![vec![0.0], vec![1.0]]).unwrap();
        assert!(silhouette(&points, &[0, 0], 0, 0).is_err());
        assert!(davies_bouldin(&points, &[0, 0]).is_err());
    }

    /// Direct textbook double-loop implementations used as oracles.
    fn brute_silhouette(points: &FeatureMatrix, labels: &[usize]) -> f64 {
        let n = points.n_rows();
        let mut total = 0.0;
        for i in 0..n {
            let own = labels[i];
            let own_size = labels.iter().filter(|&&l| l == own).count();
            let s = if own_size <= 1 {
                0.0
            } else {
                let a: f64 = (0..n)
                    .filter(|&j| j != i && labels[j] == own)
                    .map(|j| euclidean(points.row(i), points.row(j)))
                    .sum::<f64>()
                    / (own_size - 1) as f64;
                let mut b = f64::INFINITY;
                let clusters: std::collections::BTreeSet<usize> =
                    labels.iter().copied().collect();
                for c in clusters {
                    if c == own {
                        continue;
                    }
                    let size = labels.iter().filter(|&&l| l == c).count();
                    let mean = (0..n)
                        .filter(|&j| labels[j] == c)
                        .map(|j| euclidean(points.row(i), points.row(j)))
                        .sum::<f64>()
                        / size as f64;
                    b = b.min(mean);
                }
                if a.max(b) == 0.0 {
                    0.0
                } else {
                    (b - a) / a.max(b)
                }
            };
            total += s;
        }
        total / n as f64
    }

    fn brute_davies_bouldin(points: &FeatureMatrix, labels: &[usize]) -> f64 {
        let clusters: Vec<usize> = {
            let mut c: Vec<usize> = labels.to_vec();
            c.sort_unstable();
            c.dedup();
            c
        };
        let dim = points.n_cols();
        let centroid = |c: usize| -> Vec<f64> {
            let idxs: Vec<usize> = (0..points.n_rows()).filter(|&i| labels[i] == c).collect();
            let mut m = vec![0.0; dim];
            for &i in &idxs {
                for d in 0..dim {
                    m[d] += points.get(i, d);
                }
            }
            m.iter().map(|v| v / idxs.len() as f64).collect()
        };
        let sigma = |c: usize| -> f64 {
            let ctr = centroid(c);
            let idxs: Vec<usize> = (0..points.n_rows()).filter(|&i| labels[i] == c).collect();
            idxs.iter()
                .map(|&i| euclidean(points.row(i), &ctr))
                .sum::<f64>()
                / idxs.len() as f64
        };
        let k = clusters.len();
        let mut total = 0.0;
        for &i in &clusters {
            let mut worst: f64 = 0.0;
            for &j in &clusters {
                if i != j {
                    let d = euclidean(&centroid(i), &centroid(j));
                    worst = worst.max((sigma(i) + sigma(j)) / d);
                }
            }
            total += worst;
        }
        total / k as f64
    }

    #[test]
    fn silhouette_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..10 {
            let n = 40;
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    let base = if i % 2 == 0 { 0.0 } else { 5.0 };
                    vec![
                        base + rng.gen_range(-1.0..1.0),
                        base + rng.gen_range(-1.0..1.0),
                    ]
                })
                .collect();
            let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
            let points = FeatureMatrix::from_rows(rows).unwrap();
            let fast = silhouette(&points, &labels, 0, 0).unwrap();
            let slow = brute_silhouette(&points, &labels);
            assert!((fast - slow).abs() < 1e-12, "{fast} vs {slow}");
        }
    }

    #[test]
    fn davies_bouldin_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(78);
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|i| {
                let base = (i % 3) as f64 * 4.0;
                vec![base + rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]
            })
            .collect();
        let labels: Vec<usize> = (0..60).map(|i| i % 3).collect();
        let points = FeatureMatrix::from_rows(rows).unwrap();
        let fast = davies_bouldin(&points, &labels).unwrap();
        let slow = brute_davies_bouldin(&points, &labels);
        assert!((fast - slow).abs() < 1e-12);
    }

    #[test]
    fn two_singletons_have_zero_db() {
        let points = FeatureMatrix::from_rows(vec![vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap();
        let db = davies_bouldin(&points, &[0, 1]).unwrap();
        assert_eq!(db, 0.0, "zero scatter on both sides");
    }

    #[test]
    fn coincident_centroids_error() {
        let points = FeatureMatrix::from_rows(vec![
            vec![0.0, 1.0],
            vec![0.0, -1.0],
            vec![1.0, 0.0],
            vec![-1.0, 0.0],
        ])
        .unwrap();
        let err = davies_bouldin(&points, &[0, 0, 1, 1]).unwrap_err();
        assert!(err.to_string().contains("degenerate centroids"));
    }

    #[test]
    fn scores_invariant_under_permutation_and_translation() {
        let mut rng = ChaCha8Rng::seed_from_u64(79);
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| {
                let base = (i % 2) as f64 * 6.0;
                vec![base + rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]
            })
            .collect();
        let labels: Vec<usize> = (0..30).map(|i| i % 2).collect();
        let points = FeatureMatrix::from_rows(rows.clone()).unwrap();
        let s0 = silhouette(&points, &labels, 0, 0).unwrap();
        let db0 = davies_bouldin(&points, &labels).unwrap();

        // permutation
        let perm: Vec<usize> = (0..30).rev().collect();
        let perm_points = points.subset(&perm);
        let perm_labels: Vec<usize> = perm.iter().map(|&i| labels[i]).collect();
        let s1 = silhouette(&perm_points, &perm_labels, 0, 0).unwrap();
        let db1 = davies_bouldin(&perm_points, &perm_labels).unwrap();
        assert!((s0 - s1).abs() < 1e-12);
        assert!((db0 - db1).abs() < 1e-12);

        // rigid translation
        let shifted: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| vec![r[0] + 42.0, r[1] - 17.0])
            .collect();
        let shifted_points = FeatureMatrix::from_rows(shifted).unwrap();
        let s2 = silhouette(&shifted_points, &labels, 0, 0).unwrap();
        let db2 = davies_bouldin(&shifted_points, &labels).unwrap();
        assert!((s0 - s2).abs() < 1e-9);
        assert!((db0 - db2).abs() < 1e-9);
    }

    #[test]
    fn silhouette_in_range_and_db_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(80);
        for _ in 0..20 {
            let n = rng.gen_range(6..60);
            let c = rng.gen_range(2..4);
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| vec![rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)])
                .collect();
            let mut labels: Vec<usize> = (0..n).map(|i| i % c).collect();
            labels[0] = 0;
            let points = FeatureMatrix::from_rows(rows).unwrap();
            let s = silhouette(&points, &labels, 0, 0).unwrap();
            assert!((-1.0..=1.0).contains(&s));
            if let Ok(db) = davies_bouldin(&points, &labels) {
                assert!(db >= 0.0);
            }
        }
    }

    #[test]
    fn subsample_cap_is_seeded_and_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(81);
        let rows: Vec<Vec<f64>> = (0..500)
            .map(|i| {
                let base = (i % 2) as f64 * 8.0;
                vec![base + rng.gen_range(-1.0..1.0)]
            })
            .collect();
        let labels: Vec<usize> = (0..500).map(|i| i % 2).collect();
        let points = FeatureMatrix::from_rows(rows).unwrap();
        let a = silhouette(&points, &labels, 100, 7).unwrap();
        let b = silhouette(&points, &labels, 100, 7).unwrap();
        assert_eq!(a, b);
        assert!(a > 0.5, "well separated clusters stay separated");
    }

    #[test]
    fn standardize_zeroes_constant_columns() {
        let points = FeatureMatrix::from_rows(vec![
            vec![1.0, 5.0],
            vec![2.0, 5.0],
            vec![3.0, 5.0],
        ])
        .unwrap();
        let z = standardize(&points);
        assert!(z.rows_iter().all(|r| r[1] == 0.0));
        let mean: f64 = z.rows_iter().map(|r| r[0]).sum::<f64>() / 3.0;
        assert!(mean.abs() < 1e-12);
    }

    #[test]
    fn transfer_score_degenerate_is_worst() {
        let points = FeatureMatrix::from_rows(vec![vec![0.0], vec![1.0]]).unwrap();
        let score = transfer_score(&points, &[0, 0], 0, 0);
        assert_eq!(score.silhouette, -1.0);
        assert!(score.db_index.is_infinite());
    }

    #[test]
    fn cluster_score_ordering() {
        let a = ClusterScore { silhouette: 0.5, db_index: 2.0 };
        let b = ClusterScore { silhouette: 0.4, db_index: 1.0 };
        assert!(a.improves_on(&b), "silhouette precedence");
        assert!(!b.improves_on(&a));
        let c = ClusterScore { silhouette: 0.5, db_index: 1.5 };
        assert!(c.improves_on(&a), "equal silhouette, lower DB wins");
    }
}

//! Curriculum-pseudo-labeling teacher-student self-training.
//!
//! An initial teacher trained on the labeled set predicts the unlabeled set.
//! Per-class confidence thresholds `T(c) = beta(c) * tau` track each class's
//! learning status: `sigma(c)` counts confident predictions of class c, and
//! `beta` normalizes it by the best class -- or, while most unlabeled data
//! is still unused, by the unused count (warm-up), which slows the
//! thresholds down and prevents single-class collapse. Samples whose top
//! probability clears their class threshold become pseudo-labels; a fresh
//! student trains on labeled + pseudo-labeled data and replaces the teacher
//! while the clustering score on the unlabeled set keeps improving.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::gbdt::{self, argmax, TrainConfig, TreeEnsemble};
use crate::metrics::ClusterScore;

/// Self-training loop parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelfTrainConfig {
    /// Fixed confidence threshold tau.
    pub tau: f64,
    /// Floor applied to the flexible thresholds. 0 reproduces the plain
    /// `beta * tau` formula; 0.5 is the recommended guard against the
    /// all-pass case when no prediction is confident yet (all sigma = 0
    /// makes every threshold 0, admitting everything).
    pub tau_min: f64,
    pub max_iters: usize,
}

impl Default for SelfTrainConfig {
    fn default() -> Self {
        SelfTrainConfig {
            tau: 0.9,
            tau_min: 0.0,
            max_iters: 10,
        }
    }
}

impl SelfTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "tau {} must be in (0, 1)",
                self.tau
            )));
        }
        if !(0.0..=self.tau).contains(&self.tau_min) {
            return Err(Error::InvalidConfig(format!(
                "tau_min {} must be in [0, tau]",
                self.tau_min
            )));
        }
        Ok(())
    }
}

/// Per-class threshold state at one time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassThresholds {
    pub tau: f64,
    pub sigma: Vec<usize>,
    pub beta: Vec<f64>,
    pub thresholds: Vec<f64>,
    /// True when the warm-up denominator (unused count) was in effect.
    pub warmup_active: bool,
}

/// Pseudo-labels selected in one iteration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabelSet {
    /// Row indices into the unlabeled set.
    pub sample_ids: Vec<usize>,
    pub labels: Vec<usize>,
    pub confidences: Vec<f64>,
    pub iteration: usize,
}

impl PseudoLabelSet {
    pub fn len(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_ids.is_empty()
    }

    pub fn per_class_counts(&self, n_classes: usize) -> Vec<usize> {
        let mut counts = vec![0usize; n_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

/// Count confident predictions per class: rows whose top probability
/// strictly exceeds tau, attributed to the argmax class (ties to the lowest
/// class index).
pub fn compute_sigma(predictions: &[Vec<f64>], n_classes: usize, tau: f64) -> Vec<usize> {
    let mut sigma = vec![0usize; n_classes];
    for row in predictions {
        let best = argmax(row);
        if row[best] > tau {
            sigma[best] += 1;
        }
    }
    sigma
}

/// Normalize sigma into `beta in [0, 1]`. While `max sigma < unused`
/// (`unused = N - sum sigma`), the warm-up denominator
/// `max(max sigma, unused)` is used; otherwise the plain `max sigma`.
/// A zero denominator yields all-zero beta.
pub fn compute_beta(sigma: &[usize], n_unlabeled: usize) -> (Vec<f64>, bool) {
    let max_sigma = sigma.iter().copied().max().unwrap_or(0);
    let used: usize = sigma.iter().sum();
    let unused = n_unlabeled.saturating_sub(used);
    let warmup = max_sigma < unused;
    let denominator = if warmup {
        max_sigma.max(unused)
    } else {
        max_sigma
    };
    if denominator == 0 {
        return (vec![0.0; sigma.len()], warmup);
    }
    (
        sigma
            .iter()
            .map(|&s| s as f64 / denominator as f64)
            .collect(),
        warmup,
    )
}

/// Per-class flexible thresholds `max(beta(c) * tau, tau_min)`.
pub fn flexible_thresholds(beta: &[f64], tau: f64, tau_min: f64) -> Vec<f64> {
    beta.iter().map(|&b| (b * tau).max(tau_min)).collect()
}

/// Compute the full threshold state for one prediction pass.
pub fn class_thresholds(
    predictions: &[Vec<f64>],
    n_classes: usize,
    config: &SelfTrainConfig,
) -> ClassThresholds {
    let sigma = compute_sigma(predictions, n_classes, config.tau);
    let (beta, warmup_active) = compute_beta(&sigma, predictions.len());
    let thresholds = flexible_thresholds(&beta, config.tau, config.tau_min);
    ClassThresholds {
        tau: config.tau,
        sigma,
        beta,
        thresholds,
        warmup_active,
    }
}

/// Select pseudo-labels: a sample is adopted when its top probability
/// strictly exceeds the threshold of its argmax class.
pub fn pseudo_label(
    predictions: &[Vec<f64>],
    thresholds: &[f64],
    iteration: usize,
) -> PseudoLabelSet {
    let mut set = PseudoLabelSet {
        iteration,
        ..PseudoLabelSet::default()
    };
    for (i, row) in predictions.iter().enumerate() {
        let best = argmax(row);
        if row[best] > thresholds[best] {
            set.sample_ids.push(i);
            set.labels.push(best);
            set.confidences.push(row[best]);
        }
    }
    set
}

/// One row of the iteration log (iteration 0 is the initial teacher).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub thresholds: ClassThresholds,
    pub pseudo_counts: Vec<usize>,
    pub score: ClusterScore,
}

/// Outcome of the teacher-student loop.
#[derive(Debug, Clone)]
pub struct SelfTrainOutcome {
    /// Best-scoring model over all iterations (including the teacher).
    pub model: TreeEnsemble,
    /// Iteration at which the returned model was trained (0 = teacher).
    pub best_iteration: usize,
    pub log: Vec<IterationRecord>,
}

/// Serialize the iteration log as CSV:
/// `iter,class,sigma,beta,threshold,pseudo_count,silhouette,db_index`.
pub fn write_iteration_log<W: std::io::Write>(
    writer: W,
    log: &[IterationRecord],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "iter",
        "class",
        "sigma",
        "beta",
        "threshold",
        "pseudo_count",
        "silhouette",
        "db_index",
    ])?;
    for rec in log {
        for c in 0..rec.thresholds.sigma.len() {
            w.write_record([
                rec.iteration.to_string(),
                c.to_string(),
                rec.thresholds.sigma[c].to_string(),
                format!("{:.6}", rec.thresholds.beta[c]),
                format!("{:.6}", rec.thresholds.thresholds[c]),
                rec.pseudo_counts[c].to_string(),
                format!("{:.6}", rec.score.silhouette),
                format!("{:.6}", rec.score.db_index),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// The teacher-student cycle: train a teacher on labeled data, then
/// repeatedly pseudo-label the unlabeled set under flexible thresholds, mix
/// the pseudo-labels with the labeled data, and train a fresh student on the
/// mix. The student replaces the teacher while the scorer improves; the
/// best-scoring model over all iterations is returned together with a
/// per-iteration log.
///
/// Per-sample class weights inside training are `1/n_c` with the counts
/// recomputed over each mixed set. Pseudo-labels are recomputed from scratch
/// every iteration.
pub fn teacher_student_loop<S>(
    labeled: &FeatureMatrix,
    labels: &[usize],
    n_classes: usize,
    unlabeled: &FeatureMatrix,
    train_config: &TrainConfig,
    st_config: &SelfTrainConfig,
    scorer: S,
) -> Result<SelfTrainOutcome>
where
    S: Fn(&FeatureMatrix, &[usize]) -> ClusterScore,
{
    st_config.validate()?;
    gbdt::class_counts(labels, n_classes)?; // labeled set must carry every class
    if unlabeled.n_cols() != labeled.n_cols() {
        return Err(Error::ArityMismatch {
            expected: labeled.n_cols(),
            got: unlabeled.n_cols(),
        });
    }

    let teacher = gbdt::train(labeled, labels, n_classes, train_config)?;
    if st_config.max_iters == 0 || unlabeled.is_empty() {
        return Ok(SelfTrainOutcome {
            model: teacher,
            best_iteration: 0,
            log: Vec::new(),
        });
    }

    let evaluate = |model: &TreeEnsemble| -> Result<(Vec<Vec<f64>>, Vec<usize>, ClusterScore)> {
        let preds = model.predict_proba_batch(unlabeled)?;
        let hard: Vec<usize> = preds.iter().map(|p| argmax(p)).collect();
        let score = scorer(unlabeled, &hard);
        Ok((preds, hard, score))
    };

    let (mut teacher_preds, _, teacher_score) = evaluate(&teacher)?;
    let teacher_thresholds = class_thresholds(&teacher_preds, n_classes, st_config);
    let teacher_pseudo = pseudo_label(&teacher_preds, &teacher_thresholds.thresholds, 0);
    let mut log = vec![IterationRecord {
        iteration: 0,
        thresholds: teacher_thresholds,
        pseudo_counts: teacher_pseudo.per_class_counts(n_classes),
        score: teacher_score,
    }];

    let mut best_model = teacher;
    let mut best_iteration = 0usize;
    let mut best_score = teacher_score;
    let mut prev_score = teacher_score;

    for iteration in 1..=st_config.max_iters {
        let thresholds = class_thresholds(&teacher_preds, n_classes, st_config);
        let pseudo = pseudo_label(&teacher_preds, &thresholds.thresholds, iteration);

        // Mix: labeled data plus this iteration's pseudo-labels.
        let mut mixed = labeled.clone();
        let mut mixed_labels = labels.to_vec();
        for (&row_id, &label) in pseudo.sample_ids.iter().zip(&pseudo.labels) {
            mixed.push_row(unlabeled.row(row_id))?;
            mixed_labels.push(label);
        }

        let student = gbdt::train(&mixed, &mixed_labels, n_classes, train_config)?;
        let (student_preds, _, student_score) = evaluate(&student)?;

        log.push(IterationRecord {
            iteration,
            thresholds,
            pseudo_counts: pseudo.per_class_counts(n_classes),
            score: student_score,
        });

        if student_score.improves_on(&best_score) {
            best_model = student.clone();
            best_iteration = iteration;
            best_score = student_score;
        }
        if !student_score.improves_on(&prev_score) {
            break;
        }
        // The student is promoted to teacher: its predictions drive the next
        // iteration's thresholds and pseudo-labels.
        prev_score = student_score;
        teacher_preds = student_preds;
    }

    Ok(SelfTrainOutcome {
        model: best_model,
        best_iteration,
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::transfer_score;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sigma_counts_confident_argmaxes() {
        // 3 confident A, 1 confident B, 6 unconfident rows.
        let mut preds = vec![
            vec![0.95, 0.05],
            vec![0.92, 0.08],
            vec![0.91, 0.09],
            vec![0.02, 0.98],
        ];
        preds.extend(vec![vec![0.6, 0.4]; 6]);
        let sigma = compute_sigma(&preds, 2, 0.9);
        assert_eq!(sigma, vec![3, 1]);
    }

    #[test]
    fn sigma_all_unconfident_is_zero() {
        let preds = vec![vec![0.55, 0.45]; 8];
        assert_eq!(compute_sigma(&preds, 2, 0.9), vec![0, 0]);
    }

    #[test]
    fn sigma_tau_zero_counts_everything() {
        let preds = vec![vec![0.5, 0.5], vec![0.4, 0.6], vec![0.7, 0.3]];
        let sigma = compute_sigma(&preds, 2, 0.0);
        assert_eq!(sigma.iter().sum::<usize>(), 3);
        // The exact-tie row goes to the lowest class index.
        assert_eq!(sigma, vec![2, 1]);
    }

    #[test]
    fn beta_warmup_case() {
        // sigma = (3, 1), N = 10: unused = 6 > 3 -> warm-up, beta = (0.5, 1/6).
        let (beta, warmup) = compute_beta(&[3, 1], 10);
        assert!(warmup);
        assert!((beta[0] - 0.5).abs() < 1e-12);
        assert!((beta[1] - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn beta_standard_case() {
        // sigma = (6, 2), N = 10: unused = 2 < 6 -> standard, beta = (1, 1/3).
        let (beta, warmup) = compute_beta(&[6, 2], 10);
        assert!(!warmup);
        assert!((beta[0] - 1.0).abs() < 1e-12);
        assert!((beta[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn beta_zero_sigma_is_zero() {
        let (beta, _) = compute_beta(&[0, 0, 0], 10);
        assert_eq!(beta, vec![0.0, 0.0, 0.0]);
        let (beta_empty, _) = compute_beta(&[0, 0], 0);
        assert_eq!(beta_empty, vec![0.0, 0.0]);
    }

    #[test]
    fn warmup_never_exceeds_standard_beta() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let c = rng.gen_range(2..5);
            let sigma: Vec<usize> = (0..c).map(|_| rng.gen_range(0..20)).collect();
            let used: usize = sigma.iter().sum();
            let n = used + rng.gen_range(0..40);
            let max_sigma = *sigma.iter().max().unwrap();
            let (beta, _) = compute_beta(&sigma, n);
            for (c, &b) in beta.iter().enumerate() {
                assert!((0.0..=1.0).contains(&b));
                if max_sigma > 0 {
                    let standard = sigma[c] as f64 / max_sigma as f64;
                    assert!(b <= standard + 1e-12, "warm-up denominator only grows");
                }
            }
        }
    }

    #[test]
    fn thresholds_product_and_floor() {
        let t = flexible_thresholds(&[1.0, 1.0 / 3.0], 0.9, 0.0);
        assert!((t[0] - 0.9).abs() < 1e-12);
        assert!((t[1] - 0.3).abs() < 1e-12);

        let floored = flexible_thresholds(&[0.0, 0.0], 0.9, 0.5);
        assert_eq!(floored, vec![0.5, 0.5]);

        // tau_min = 0 reproduces the plain product exactly.
        let plain = flexible_thresholds(&[0.25, 0.75], 0.8, 0.0);
        assert_eq!(plain, vec![0.2, 0.6000000000000001]);
        assert!(plain.iter().all(|&t| t <= 0.8));
    }

    #[test]
    fn pseudo_label_rule_application() {
        let preds = vec![vec![0.95, 0.05], vec![0.6, 0.4]];
        let set = pseudo_label(&preds, &[0.9, 0.3], 1);
        assert_eq!(set.sample_ids, vec![0]);
        assert_eq!(set.labels, vec![0]);
        assert!((set.confidences[0] - 0.95).abs() < 1e-12);

        let empty = pseudo_label(&[], &[0.9, 0.3], 1);
        assert!(empty.is_empty());
    }

    #[test]
    fn every_pseudo_label_clears_its_threshold() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let n = rng.gen_range(1..60);
            let c = rng.gen_range(2..5);
            let preds: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    let raw: Vec<f64> = (0..c).map(|_| rng.gen_range(0.01..1.0)).collect();
                    let sum: f64 = raw.iter().sum();
                    raw.iter().map(|v| v / sum).collect()
                })
                .collect();
            let config = SelfTrainConfig {
                tau: 0.7,
                tau_min: 0.2,
                max_iters: 1,
            };
            let state = class_thresholds(&preds, c, &config);
            let set = pseudo_label(&preds, &state.thresholds, 1);
            for (&i, &label) in set.sample_ids.iter().zip(&set.labels) {
                assert!(preds[i][label] > state.thresholds[label]);
                assert_eq!(argmax(&preds[i]), label);
            }
            for &t in &state.thresholds {
                assert!(t <= config.tau + 1e-12);
                assert!(t >= config.tau_min);
            }
        }
    }

    #[test]
    fn adding_one_confident_sample_bumps_exactly_one_sigma() {
        let mut preds = vec![vec![0.95, 0.05], vec![0.3, 0.7]];
        let before = compute_sigma(&preds, 2, 0.9);
        preds.push(vec![0.05, 0.95]);
        let after = compute_sigma(&preds, 2, 0.9);
        assert_eq!(after[0], before[0]);
        assert_eq!(after[1], before[1] + 1);
    }

    /// Two shifted-but-separable Gaussian blobs per class; hidden truth kept
    /// for accuracy checks.
    fn synthetic_transfer_sets(
        seed: u64,
        shift: f64,
    ) -> (FeatureMatrix, Vec<usize>, FeatureMatrix, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let make = |rng: &mut ChaCha8Rng, n: usize, offset: f64| {
            let mut rows = Vec::new();
            let mut ys = Vec::new();
            for _ in 0..n {
                let c = rng.gen_range(0..3usize);
                rows.push(vec![
                    c as f64 * 4.0 + offset + rng.gen_range(-1.0..1.0),
                    -(c as f64) * 3.0 + offset + rng.gen_range(-1.0..1.0),
                ]);
                ys.push(c);
            }
            (FeatureMatrix::from_rows(rows).unwrap(), ys)
        };
        let (lx, ly) = make(&mut rng, 150, 0.0);
        let (ux, uy) = make(&mut rng, 300, shift);
        (lx, ly, ux, uy)
    }

    #[test]
    fn max_iters_zero_returns_teacher_unchanged() {
        let (lx, ly, ux, _) = synthetic_transfer_sets(3, 0.5);
        let tc = TrainConfig {
            rounds: 10,
            max_depth: 3,
            ..TrainConfig::default()
        };
        let st = SelfTrainConfig {
            max_iters: 0,
            ..SelfTrainConfig::default()
        };
        let outcome = teacher_student_loop(&lx, &ly, 3, &ux, &tc, &st, |f, l| {
            transfer_score(f, l, 0, 0)
        })
        .unwrap();
        let teacher = gbdt::train(&lx, &ly, 3, &tc).unwrap();
        assert_eq!(outcome.model, teacher);
        assert_eq!(outcome.best_iteration, 0);
        assert!(outcome.log.is_empty());
    }

    #[test]
    fn missing_class_in_labeled_set_errors() {
        let lx = FeatureMatrix::from_rows(vec![vec![0.0], vec![1.0]]).unwrap();
        let ux = FeatureMatrix::from_rows(vec![vec![0.5]]).unwrap();
        let err = teacher_student_loop(
            &lx,
            &[0, 0],
            2,
            &ux,
            &TrainConfig::default(),
            &SelfTrainConfig::default(),
            |f, l| transfer_score(f, l, 0, 0),
        )
        .unwrap_err();
        assert!(matches!(err, Error::ClassMissing(1)));
    }

    #[test]
    fn identical_distribution_pseudo_labels_beat_teacher_accuracy() {
        let (lx, ly, ux, uy) = synthetic_transfer_sets(11, 0.0);
        let tc = TrainConfig {
            rounds: 20,
            max_depth: 3,
            ..TrainConfig::default()
        };
        let st = SelfTrainConfig {
            tau: 0.9,
            tau_min: 0.5,
            max_iters: 3,
        };
        let teacher = gbdt::train(&lx, &ly, 3, &tc).unwrap();
        let teacher_preds = teacher.predict_proba_batch(&ux).unwrap();
        let teacher_acc = teacher_preds
            .iter()
            .zip(&uy)
            .filter(|(p, &y)| argmax(p) == y)
            .count() as f64
            / uy.len() as f64;

        let state = class_thresholds(&teacher_preds, 3, &st);
        let pseudo = pseudo_label(&teacher_preds, &state.thresholds, 1);
        assert!(!pseudo.is_empty(), "separable data yields confident labels");
        let pseudo_acc = pseudo
            .sample_ids
            .iter()
            .zip(&pseudo.labels)
            .filter(|(&i, &l)| uy[i] == l)
            .count() as f64
            / pseudo.len() as f64;
        assert!(
            pseudo_acc >= teacher_acc,
            "confident subset ({pseudo_acc}) at least as clean as overall ({teacher_acc})"
        );
    }

    #[test]
    fn loop_terminates_and_returns_best_scoring_model() {
        let (lx, ly, ux, _) = synthetic_transfer_sets(21, 1.0);
        let tc = TrainConfig {
            rounds: 15,
            max_depth: 3,
            ..TrainConfig::default()
        };
        let st = SelfTrainConfig {
            tau: 0.9,
            tau_min: 0.5,
            max_iters: 4,
        };
        let outcome = teacher_student_loop(&lx, &ly, 3, &ux, &tc, &st, |f, l| {
            transfer_score(f, l, 0, 0)
        })
        .unwrap();
        assert!(outcome.log.len() <= st.max_iters + 1);
        assert!(outcome.best_iteration < outcome.log.len());
        // The returned model is the argmax of the scorer over the log.
        let best_score = outcome.log[outcome.best_iteration].score;
        for rec in &outcome.log {
            assert!(!rec.score.improves_on(&best_score));
        }
        // The final model never scores below the initial teacher.
        assert!(!outcome.log[0].score.improves_on(&best_score));
    }

    #[test]
    fn iteration_log_csv_layout() {
        let log = vec![IterationRecord {
            iteration: 0,
            thresholds: ClassThresholds {
                tau: 0.9,
                sigma: vec![3, 1],
                beta: vec![0.5, 1.0 / 6.0],
                thresholds: vec![0.45, 0.15],
                warmup_active: true,
            },
            pseudo_counts: vec![5, 2],
            score: ClusterScore {
                silhouette: 0.25,
                db_index: 3.5,
            },
        }];
        let mut buf = Vec::new();
        write_iteration_log(&mut buf, &log).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "iter,class,sigma,beta,threshold,pseudo_count,silhouette,db_index"
        );
        assert_eq!(lines.next().unwrap(), "0,0,3,0.500000,0.450000,5,0.250000,3.500000");
        assert_eq!(lines.next().unwrap(), "0,1,1,0.166667,0.150000,2,0.250000,3.500000");
    }
}

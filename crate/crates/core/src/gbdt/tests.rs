use super::*;
use rand::Rng;

/// Deterministic 4-class blob set: class c centered at (3c, -2c, c) plus two
/// pure-noise columns and a padded `-1` column to exercise missing routing.
pub(crate) fn blob_set(n_per_class: usize, seed: u64) -> (FeatureMatrix, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for c in 0..4usize {
        for _ in 0..n_per_class {
            let noise = |rng: &mut ChaCha8Rng| rng.gen_range(-0.8..0.8);
            let missing = rng.gen_bool(0.1);
            rows.push(vec![
                3.0 * c as f64 + noise(&mut rng),
                -2.0 * c as f64 + noise(&mut rng),
                c as f64 + noise(&mut rng),
                rng.gen_range(-1.0 + f64::EPSILON..1.0),
                rng.gen_range(0.0..1.0),
                if missing { -1.0 } else { c as f64 * 0.5 + noise(&mut rng) },
            ]);
            labels.push(c);
        }
    }
    (FeatureMatrix::from_rows(rows).unwrap(), labels)
}

#[test]
fn loss_perfect_prediction_is_zero() {
    let loss = weighted_ce_loss(&[1.0, 0.0], 2, &[0], &[1, 1]).unwrap();
    assert_eq!(loss.value, 0.0);
    assert!(!loss.clamped);
}

#[test]
fn loss_balanced_half_probabilities() {
    // N=2, one sample per class, both predicted 0.5 at the true label.
    let probs = [0.5, 0.5, 0.5, 0.5];
    let loss = weighted_ce_loss(&probs, 2, &[0, 1], &[1, 1]).unwrap();
    assert!((loss.value - std::f64::consts::LN_2).abs() < 1e-12);
}

#[test]
fn loss_weighted_three_samples() {
    // N=3: class A has 2 samples, class B has 1; all correct at p=0.5.
    // L = (1/3) * (1/2 + 1/2 + 1) * ln 2 = (2/3) ln 2.
    let probs = [0.5, 0.5, 0.5, 0.5, 0.5, 0.5];
    let loss = weighted_ce_loss(&probs, 2, &[0, 0, 1], &[2, 1]).unwrap();
    assert!((loss.value - 2.0 / 3.0 * std::f64::consts::LN_2).abs() < 1e-12);
}

#[test]
fn loss_clamps_zero_probability() {
    let probs = [0.0, 1.0];
    let loss = weighted_ce_loss(&probs, 2, &[0], &[1, 1]).unwrap();
    assert!(loss.clamped);
    assert!((loss.value - (-PROB_CLAMP.ln())).abs() < 1e-9);
}

#[test]
fn grad_hess_uniform_binary() {
    // Uniform margins, C=2, weights 1: p = 0.5 everywhere.
    let (g, h) = softmax_grad_hess(&[0.0, 0.0], 2, &[0], &[1.0, 1.0]);
    assert!((g[0] - (-0.5)).abs() < 1e-12);
    assert!((g[1] - 0.5).abs() < 1e-12);
    assert!((h[0] - 0.25).abs() < 1e-12 && (h[1] - 0.25).abs() < 1e-12);
}

#[test]
fn grad_hess_scales_linearly_in_weight() {
    let margins = [0.3, -0.2, 0.7, 0.1, 0.0, -0.5];
    let labels = [0, 2];
    let (g1, h1) = softmax_grad_hess(&margins, 3, &labels, &[0.5, 1.0, 2.0]);
    let (g2, h2) = softmax_grad_hess(&margins, 3, &labels, &[1.0, 2.0, 4.0]);
    for i in 0..6 {
        assert_eq!(g2[i], 2.0 * g1[i]);
        assert_eq!(h2[i], 2.0 * h1[i]);
    }
}

/// Central finite differences of the Eq.-style weighted cross entropy with
/// respect to each margin, matched against the analytic gradient.
#[test]
fn grad_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..25 {
        let c = rng.gen_range(2..5);
        let n = rng.gen_range(c..12);
        let labels: Vec<usize> = (0..n).map(|i| i % c).collect();
        let counts = class_counts(&labels, c).unwrap();
        // Differentiate the sample-normalized loss, so weights fold in 1/N.
        let weights: Vec<f64> = counts
            .iter()
            .map(|&k| 1.0 / (k as f64 * n as f64))
            .collect();
        let mut margins: Vec<f64> = (0..n * c).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let (g, _) = softmax_grad_hess(&margins, c, &labels, &weights);

        let loss_at = |m: &[f64]| -> f64 {
            let probs: Vec<f64> = m
                .chunks(c)
                .flat_map(|row| softmax(row))
                .collect();
            weighted_ce_loss(&probs, c, &labels, &counts).unwrap().value
        };

        let delta = 1e-5;
        for idx in 0..n * c {
            let orig = margins[idx];
            margins[idx] = orig + delta;
            let up = loss_at(&margins);
            margins[idx] = orig - delta;
            let down = loss_at(&margins);
            margins[idx] = orig;
            let fd = (up - down) / (2.0 * delta);
            let denom = fd.abs().max(1e-8);
            assert!(
                ((g[idx] - fd) / denom).abs() < 1e-4,
                "gradient {} vs finite difference {} at {idx}",
                g[idx],
                fd
            );
        }
    }
}

#[test]
fn separable_data_one_round_depth_one() {
    let features = FeatureMatrix::from_rows(vec![
        vec![0.0],
        vec![1.0],
        vec![2.0],
        vec![10.0],
        vec![11.0],
        vec![12.0],
    ])
    .unwrap();
    let labels = vec![0, 0, 0, 1, 1, 1];
    let config = TrainConfig {
        rounds: 1,
        max_depth: 1,
        ..TrainConfig::default()
    };
    let model = train(&features, &labels, 2, &config).unwrap();
    let correct = features
        .rows_iter()
        .zip(&labels)
        .filter(|(row, &y)| model.predict_class(row).unwrap() == y)
        .count();
    assert_eq!(correct, 6, "single split separates the classes");
}

#[test]
fn huge_lambda_keeps_predictions_at_base() {
    let features = FeatureMatrix::from_rows(vec![
        vec![0.0],
        vec![1.0],
        vec![10.0],
        vec![11.0],
    ])
    .unwrap();
    let labels = vec![0, 0, 1, 1];
    let config = TrainConfig {
        lambda: 1e18,
        rounds: 5,
        ..TrainConfig::default()
    };
    let model = train(&features, &labels, 2, &config).unwrap();
    for row in features.rows_iter() {
        let margins = model.predict_margins(row).unwrap();
        assert!(margins.iter().all(|m| m.abs() < 1e-12));
        let proba = model.predict_proba(row).unwrap();
        assert!((proba[0] - 0.5).abs() < 1e-12);
    }
}

#[test]
fn single_class_input_errors() {
    let features = FeatureMatrix::from_rows(vec![vec![0.0], vec![1.0]]).unwrap();
    let labels = vec![0, 0];
    assert!(matches!(
        train(&features, &labels, 2, &TrainConfig::default()),
        Err(Error::ClassMissing(1))
    ));
}

#[test]
fn non_finite_feature_errors() {
    let features = FeatureMatrix::from_rows(vec![vec![0.0], vec![f64::NAN]]).unwrap();
    let labels = vec![0, 1];
    assert!(train(&features, &labels, 2, &TrainConfig::default()).is_err());
}

/// Recompute the regularized objective from public pieces and check it never
/// increases across boosting rounds. The loss enters in its sample-summed
/// form (weights 1/n_c, no 1/N mean), which is the scaling the per-sample
/// gradients correspond to; the mean form differs only by the constant N.
pub(crate) fn objective_trajectory(
    model: &TreeEnsemble,
    features: &FeatureMatrix,
    labels: &[usize],
) -> Vec<f64> {
    let counts = class_counts(labels, model.n_classes).unwrap();
    let n = labels.len() as f64;
    (0..=model.rounds())
        .map(|r| {
            let probs: Vec<f64> = (0..features.n_rows())
                .flat_map(|i| softmax(&model.staged_margins(features.row(i), r).unwrap()))
                .collect();
            let loss = weighted_ce_loss(&probs, model.n_classes, labels, &counts)
                .unwrap()
                .value
                * n;
            let penalty: f64 = model
                .trees()
                .iter()
                .take(r)
                .flat_map(|round| round.iter())
                .map(|tree| {
                    model.config.gamma * tree.num_leaves() as f64
                        + 0.5 * model.config.lambda
                            * tree.leaf_values().map(|v| v * v).sum::<f64>()
                })
                .sum();
            loss + penalty
        })
        .collect()
}

#[test]
fn objective_non_increasing_on_blobs() {
    let (features, labels) = blob_set(50, 11);
    let config = TrainConfig {
        rounds: 30,
        max_depth: 4,
        learning_rate: 0.1,
        ..TrainConfig::default()
    };
    let model = train(&features, &labels, 4, &config).unwrap();
    let trajectory = objective_trajectory(&model, &features, &labels);
    for w in trajectory.windows(2) {
        assert!(
            w[1] <= w[0] + 1e-12,
            "objective rose from {} to {}",
            w[0],
            w[1]
        );
    }
    let acc = accuracy_metric(&model, &features, &labels);
    assert!(acc > 0.9, "blob accuracy {acc}");
}

#[test]
fn zero_trees_predict_uniform() {
    let model = TreeEnsemble::from_parts(
        3,
        2,
        vec![0.0; 3],
        Vec::new(),
        TrainConfig::default(),
    )
    .unwrap();
    let proba = model.predict_proba(&[0.5, -0.5]).unwrap();
    for p in proba {
        assert!((p - 1.0 / 3.0).abs() < 1e-12);
    }
}

#[test]
fn single_leaf_tree_softmax_pattern() {
    let tree = Tree::from_nodes(vec![Node::Leaf {
        value: 0.7,
        cover: 1.0,
    }]);
    let neutral = Tree::from_nodes(vec![Node::Leaf {
        value: 0.0,
        cover: 1.0,
    }]);
    let model = TreeEnsemble::from_parts(
        2,
        1,
        vec![0.0; 2],
        vec![vec![neutral, tree]],
        TrainConfig::default(),
    )
    .unwrap();
    let proba = model.predict_proba(&[0.0]).unwrap();
    let expected = (0.7f64).exp() / ((0.7f64).exp() + 1.0);
    assert!((proba[1] - expected).abs() < 1e-12);
    assert!((proba[0] + proba[1] - 1.0).abs() < 1e-12);
}

#[test]
fn all_missing_row_predicts_without_error() {
    let (features, labels) = blob_set(30, 3);
    let config = TrainConfig {
        rounds: 10,
        max_depth: 3,
        ..TrainConfig::default()
    };
    let model = train(&features, &labels, 4, &config).unwrap();
    let row = vec![-1.0; features.n_cols()];
    let proba = model.predict_proba(&row).unwrap();
    let sum: f64 = proba.iter().sum();
    assert!((sum - 1.0).abs() < 1e-9);
    assert!(proba.iter().all(|p| p.is_finite() && *p >= 0.0));
}

#[test]
fn wrong_arity_errors() {
    let (features, labels) = blob_set(10, 5);
    let model = train(&features, &labels, 4, &TrainConfig { rounds: 2, ..TrainConfig::default() }).unwrap();
    assert!(model.predict_proba(&[1.0, 2.0]).is_err());
}

#[test]
fn probabilities_sum_to_one() {
    let (features, labels) = blob_set(25, 17);
    let model = train(
        &features,
        &labels,
        4,
        &TrainConfig {
            rounds: 15,
            ..TrainConfig::default()
        },
    )
    .unwrap();
    for proba in model.predict_proba_batch(&features).unwrap() {
        let sum: f64 = proba.iter().sum();
        assert!((sum - 1.0).abs() <= 1e-9);
        assert!(proba.iter().all(|p| p.is_finite()));
    }
}

#[test]
fn uniform_class_counts_match_unweighted_loss() {
    // With equal counts n_c = n, weighted loss = (C/N') * mean CE where all
    // weights collapse to one constant, so argmin and trajectories align.
    let probs = [0.7, 0.3, 0.2, 0.8, 0.6, 0.4, 0.1, 0.9];
    let labels = [0, 1, 0, 1];
    let weighted = weighted_ce_loss(&probs, 2, &labels, &[2, 2]).unwrap().value;
    let unweighted: f64 = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| -probs[i * 2 + y].ln())
        .sum::<f64>()
        / labels.len() as f64;
    assert!((weighted - unweighted / 2.0).abs() < 1e-12);
}

#[test]
fn training_deterministic_across_thread_counts() {
    let (features, labels) = blob_set(40, 23);
    let config = TrainConfig {
        rounds: 8,
        max_depth: 4,
        subsample: 0.8,
        colsample: 0.8,
        seed: 99,
        ..TrainConfig::default()
    };
    let run = |threads: usize| -> String {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| train(&features, &labels, 4, &config).unwrap().to_json().unwrap())
    };
    let single = run(1);
    let quad = run(4);
    assert_eq!(single, quad, "ensemble must not depend on thread count");
}

#[test]
fn model_json_round_trips_bit_exactly() {
    let (features, labels) = blob_set(20, 31);
    let model = train(
        &features,
        &labels,
        4,
        &TrainConfig {
            rounds: 5,
            ..TrainConfig::default()
        },
    )
    .unwrap();
    let json = model.to_json().unwrap();
    let reloaded = TreeEnsemble::from_json(&json).unwrap();
    assert_eq!(model, reloaded);
    assert_eq!(json, reloaded.to_json().unwrap());
}

#[test]
fn grid_search_single_candidate() {
    let (features, labels) = blob_set(20, 41);
    let grid = vec![TrainConfig {
        rounds: 3,
        ..TrainConfig::default()
    }];
    let outcome =
        grid_search(&features, &labels, 4, &grid, 0.2, 1, accuracy_metric).unwrap();
    assert_eq!(outcome.best_index, 0);
    assert_eq!(outcome.scores.len(), 1);
}

#[test]
fn grid_search_prefers_generalizing_config() {
    // A planted pattern that a depth-2 model captures but a stumpy
    // 1-round depth-1 model cannot: XOR-ish interaction of two columns.
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..240 {
        let a = rng.gen_range(0.0..1.0);
        let b = rng.gen_range(0.0..1.0);
        let y = usize::from((a > 0.5) ^ (b > 0.5));
        rows.push(vec![a, b]);
        labels.push(y);
    }
    let features = FeatureMatrix::from_rows(rows).unwrap();
    let weak = TrainConfig {
        rounds: 1,
        max_depth: 1,
        ..TrainConfig::default()
    };
    let strong = TrainConfig {
        rounds: 40,
        max_depth: 3,
        ..TrainConfig::default()
    };
    let outcome = grid_search(
        &features,
        &labels,
        2,
        &[weak, strong],
        0.2,
        7,
        accuracy_metric,
    )
    .unwrap();
    assert_eq!(outcome.best_index, 1);
    assert!(outcome.scores[1] > outcome.scores[0]);
}

#[test]
fn grid_search_tie_takes_first() {
    let (features, labels) = blob_set(20, 43);
    let config = TrainConfig {
        rounds: 3,
        ..TrainConfig::default()
    };
    let outcome = grid_search(
        &features,
        &labels,
        4,
        &[config.clone(), config],
        0.2,
        1,
        accuracy_metric,
    )
    .unwrap();
    assert_eq!(outcome.scores[0], outcome.scores[1]);
    assert_eq!(outcome.best_index, 0);
}

#[test]
fn stratified_split_is_stratified_and_seeded() {
    let labels: Vec<usize> = (0..100).map(|i| i % 4).collect();
    let (train_a, val_a) = stratified_split(&labels, 4, 0.2, 9).unwrap();
    let (train_b, val_b) = stratified_split(&labels, 4, 0.2, 9).unwrap();
    assert_eq!(train_a, train_b);
    assert_eq!(val_a, val_b);
    assert_eq!(train_a.len() + val_a.len(), 100);
    for c in 0..4 {
        let v = val_a.iter().filter(|&&i| labels[i] == c).count();
        assert_eq!(v, 5, "20% of 25 per class");
    }
    let (_, val_other) = stratified_split(&labels, 4, 0.2, 10).unwrap();
    assert_ne!(val_a, val_other, "different seeds shuffle differently");
}

//! Stage logic: anchor partitioning, two-stage model training and
//! inference, self-training transfer, and multi-day voting.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anchors::{detect_anchors, rule_label, AnchorConfig, AnchorResult};
use crate::error::{Error, Result};
use crate::features::{
    chain_features, trip_features, AnchorCoords, FeatureMatrix, CHAIN_FEATURE_COUNT,
    TRIP_FEATURE_COUNT,
};
use crate::gbdt::{self, argmax, TrainConfig, TreeEnsemble};
use crate::ingest::{Grid, LabelSource, PoiTable, SurveyRecord, Trip};
use crate::metrics::{classification_report, transfer_score, ClassificationReport};
use crate::selftrain::{teacher_student_loop, IterationRecord, SelfTrainConfig};

use super::types::{AgeBand, IncomeBand, JobStatus, Purpose, SocioAttributes};
use super::RunConfig;

/// Stop id -> coordinates, from the first ride observing each stop in
/// canonical order.
#[derive(Debug, Clone, Default)]
pub struct StopRegistry {
    coords: BTreeMap<String, (f64, f64)>,
}

impl StopRegistry {
    pub fn from_trips(trips: &[Trip]) -> StopRegistry {
        let mut coords = BTreeMap::new();
        for trip in trips {
            for leg in &trip.legs {
                coords
                    .entry(leg.board_stop.clone())
                    .or_insert((leg.board_lon, leg.board_lat));
                coords
                    .entry(leg.alight_stop.clone())
                    .or_insert((leg.alight_lon, leg.alight_lat));
            }
        }
        StopRegistry { coords }
    }

    pub fn coords(&self, stop: &str) -> Option<(f64, f64)> {
        self.coords.get(stop).copied()
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Nearest registered stop by squared-degree distance; ties break to the
    /// lexicographically smaller id.
    pub fn nearest(&self, lon: f64, lat: f64) -> Option<&str> {
        self.coords
            .iter()
            .min_by(|(ida, a), (idb, b)| {
                let da = (a.0 - lon).powi(2) + (a.1 - lat).powi(2);
                let db = (b.0 - lon).powi(2) + (b.1 - lat).powi(2);
                da.total_cmp(&db).then(ida.cmp(idb))
            })
            .map(|(id, _)| id.as_str())
    }
}

/// Convert one survey respondent's reported trips into `Trip` values with
/// survey-true purposes. Stop ids come from the nearest observed stop so
/// POI lookups work; coordinates stay as reported.
pub fn survey_to_trips(record: &SurveyRecord, registry: &StopRegistry) -> Vec<Trip> {
    let date = NaiveDate::from_ymd_opt(2000, 1, 1).expect("fixed survey date");
    record
        .trips
        .iter()
        .map(|t| {
            let board_stop = registry
                .nearest(t.dep.0, t.dep.1)
                .unwrap_or("unknown")
                .to_string();
            let alight_stop = registry
                .nearest(t.arr.0, t.arr.1)
                .unwrap_or("unknown")
                .to_string();
            Trip {
                user_id: record.person.person_id.clone(),
                service_date: date,
                legs: vec![crate::ingest::RideRecord {
                    user_id: record.person.person_id.clone(),
                    service_date: date,
                    route_id: "survey".into(),
                    board_time: t.dep_time,
                    alight_time: t.arr_time,
                    board_stop,
                    alight_stop,
                    board_lon: t.dep.0,
                    board_lat: t.dep.1,
                    alight_lon: t.arr.0,
                    alight_lat: t.arr.1,
                }],
                purpose: Some(t.purpose),
                label_source: LabelSource::Survey,
            }
        })
        .collect()
}

/// Group trips per user in canonical order.
pub fn trips_by_user(trips: &[Trip]) -> BTreeMap<&str, Vec<&Trip>> {
    let mut map: BTreeMap<&str, Vec<&Trip>> = BTreeMap::new();
    for t in trips {
        map.entry(t.user_id.as_str()).or_default().push(t);
    }
    map
}

/// Detect anchors for every card user, in parallel, canonically ordered.
pub fn detect_all_anchors(trips: &[Trip], config: &AnchorConfig) -> Vec<AnchorResult> {
    let by_user = trips_by_user(trips);
    let users: Vec<(&str, &Vec<&Trip>)> = by_user.iter().map(|(u, t)| (*u, t)).collect();
    users
        .par_iter()
        .map(|(user, user_trips)| {
            let owned: Vec<Trip> = user_trips.iter().map(|t| (*t).clone()).collect();
            detect_anchors(user, &owned, config)
        })
        .collect()
}

/// Class labels for Model II's two classes, in index order.
pub const MODEL_II_CLASSES: [Purpose; 2] = [Purpose::Se, Purpose::Medical];

fn model_ii_class_index(purpose: Purpose) -> Option<usize> {
    match purpose {
        Purpose::Se => Some(0),
        Purpose::Medical => Some(1),
        _ => None,
    }
}

/// Feature/label pairs prepared for one purpose model.
pub struct PurposeTrainingSet {
    pub features: FeatureMatrix,
    pub labels: Vec<usize>,
}

/// Split the labeled survey trips into the two stage-1 training sets:
/// Model I takes all four purposes from respondents without a full
/// home+work record; Model II takes the S&E/Medical trips of respondents
/// with one.
pub fn stage1_training_sets(
    survey: &[SurveyRecord],
    registry: &StopRegistry,
    poi: &PoiTable,
) -> Result<(PurposeTrainingSet, PurposeTrainingSet)> {
    if survey.is_empty() {
        return Err(Error::Degenerate("empty survey data".into()));
    }
    let mut model_i = PurposeTrainingSet {
        features: FeatureMatrix::new(TRIP_FEATURE_COUNT),
        labels: Vec::new(),
    };
    let mut model_ii = PurposeTrainingSet {
        features: FeatureMatrix::new(TRIP_FEATURE_COUNT),
        labels: Vec::new(),
    };
    for record in survey {
        let anchored = record.person.work.is_some();
        for trip in survey_to_trips(record, registry) {
            let purpose = trip.purpose.expect("survey trips are labeled");
            let feats = trip_features(&trip, poi)?;
            if anchored {
                if let Some(class) = model_ii_class_index(purpose) {
                    model_ii.features.push_row(&feats.0)?;
                    model_ii.labels.push(class);
                }
            } else {
                model_i.features.push_row(&feats.0)?;
                model_i.labels.push(purpose.index());
            }
        }
    }
    Ok((model_i, model_ii))
}

/// A trained model plus its held-out split report and the training subset
/// it was fitted on (reused as the labeled set for self-training).
pub struct TrainedModel {
    pub model: TreeEnsemble,
    pub report: ClassificationReport,
    pub grid_scores: Vec<f64>,
    pub config: TrainConfig,
    pub train_features: FeatureMatrix,
    pub train_labels: Vec<usize>,
}

/// Train one classifier on a seeded stratified split and report on the
/// held-out part. When a grid is provided, grid search on the training part
/// picks the configuration first.
pub fn train_with_split(
    set: &PurposeTrainingSet,
    n_classes: usize,
    class_names: &[String],
    base_config: &TrainConfig,
    grid: &[TrainConfig],
    split_fraction: f64,
    seed: u64,
) -> Result<TrainedModel> {
    gbdt::class_counts(&set.labels, n_classes)?;
    let (train_idx, test_idx) =
        gbdt::stratified_split(&set.labels, n_classes, split_fraction, seed)?;
    let train_x = set.features.subset(&train_idx);
    let train_y: Vec<usize> = train_idx.iter().map(|&i| set.labels[i]).collect();
    let test_x = set.features.subset(&test_idx);
    let test_y: Vec<usize> = test_idx.iter().map(|&i| set.labels[i]).collect();

    let (config, grid_scores) = if grid.is_empty() {
        (base_config.clone(), Vec::new())
    } else {
        let outcome = gbdt::grid_search(
            &train_x,
            &train_y,
            n_classes,
            grid,
            0.2,
            seed ^ 0x9e37_79b9,
            gbdt::accuracy_metric,
        )?;
        (outcome.best_config, outcome.scores)
    };

    let model = gbdt::train(&train_x, &train_y, n_classes, &config)?;
    let predictions: Vec<usize> = test_x
        .rows_iter()
        .map(|row| model.predict_class(row))
        .collect::<Result<_>>()?;
    let report = classification_report(&test_y, &predictions, class_names)?;
    Ok(TrainedModel {
        model,
        report,
        grid_scores,
        config,
        train_features: train_x,
        train_labels: train_y,
    })
}

/// Stage-1 initial models: Model I over four classes, Model II over
/// S&E/Medical.
pub fn train_stage1(
    survey: &[SurveyRecord],
    registry: &StopRegistry,
    poi: &PoiTable,
    config: &RunConfig,
) -> Result<(TrainedModel, TrainedModel)> {
    let (set_i, set_ii) = stage1_training_sets(survey, registry, poi)?;
    let purpose_names: Vec<String> = Purpose::ALL.iter().map(|p| p.as_str().to_string()).collect();
    let model_i = train_with_split(
        &set_i,
        4,
        &purpose_names,
        &config.purpose_train,
        &config.purpose_grid,
        config.split_fraction,
        config.seed,
    )?;
    let ii_names: Vec<String> = MODEL_II_CLASSES
        .iter()
        .map(|p| p.as_str().to_string())
        .collect();
    let model_ii = train_with_split(
        &set_ii,
        2,
        &ii_names,
        &config.purpose_train,
        &config.purpose_grid,
        config.split_fraction,
        config.seed.wrapping_add(1),
    )?;
    Ok((model_i, model_ii))
}

/// Unlabeled stage-1 feature sets from the card data: trips of non-anchored
/// users for Model I, non-rule-labeled trips of anchored users for Model II.
pub fn stage1_unlabeled_sets(
    trips: &[Trip],
    anchors: &BTreeMap<String, AnchorResult>,
    poi: &PoiTable,
) -> Result<(FeatureMatrix, FeatureMatrix)> {
    let mut model_i = FeatureMatrix::new(TRIP_FEATURE_COUNT);
    let mut model_ii = FeatureMatrix::new(TRIP_FEATURE_COUNT);
    for trip in trips {
        let anchor = anchors.get(&trip.user_id);
        let anchored = anchor.map(|a| a.is_anchored()).unwrap_or(false);
        let feats = trip_features(trip, poi)?;
        if anchored {
            if rule_label(trip, anchor.expect("anchored user has anchors")).is_none() {
                model_ii.push_row(&feats.0)?;
            }
        } else {
            model_i.push_row(&feats.0)?;
        }
    }
    Ok((model_i, model_ii))
}

/// Outcome of one self-training run.
pub struct TransferredModel {
    pub model: TreeEnsemble,
    pub log: Vec<IterationRecord>,
    pub best_iteration: usize,
}

/// Self-train one model via the teacher-student loop with the standard
/// transfer scorer (z-scored features, predicted labels as clusters).
pub fn self_train(
    labeled: &FeatureMatrix,
    labels: &[usize],
    n_classes: usize,
    unlabeled: &FeatureMatrix,
    train_config: &TrainConfig,
    st_config: &SelfTrainConfig,
    score_cap: usize,
    seed: u64,
) -> Result<TransferredModel> {
    let outcome = teacher_student_loop(
        labeled,
        labels,
        n_classes,
        unlabeled,
        train_config,
        st_config,
        |features, hard_labels| transfer_score(features, hard_labels, score_cap, seed),
    )?;
    Ok(TransferredModel {
        model: outcome.model,
        log: outcome.log,
        best_iteration: outcome.best_iteration,
    })
}

/// One purpose decision for a card trip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PurposeDecision {
    pub user_id: String,
    pub date: NaiveDate,
    /// 1-based position within the user's day, by departure time.
    pub trip_seq: usize,
    pub purpose: Purpose,
    pub label_source: LabelSource,
    pub confidence: f64,
}

/// Stage-1 inference over card trips: every trip gets exactly one purpose.
/// Anchored users get the rule first, with Model II deciding the remaining
/// trips between S&E and Medical; non-anchored users go through Model I
/// over all four classes.
pub fn stage1_purpose(
    trips: &[Trip],
    anchors: &BTreeMap<String, AnchorResult>,
    model_i: &TreeEnsemble,
    model_ii: &TreeEnsemble,
    poi: &PoiTable,
) -> Result<Vec<PurposeDecision>> {
    if model_i.rounds() == 0 || model_ii.rounds() == 0 {
        return Err(Error::Model("purpose models are untrained".into()));
    }
    let mut seq: BTreeMap<(&str, NaiveDate), usize> = BTreeMap::new();
    let mut decisions = Vec::with_capacity(trips.len());
    for trip in trips {
        let counter = seq.entry((trip.user_id.as_str(), trip.service_date)).or_insert(0);
        *counter += 1;
        let trip_seq = *counter;

        let anchor = anchors.get(&trip.user_id);
        let anchored = anchor.map(|a| a.is_anchored()).unwrap_or(false);
        let (purpose, label_source, confidence) = if anchored {
            let anchor = anchor.expect("anchored user has anchors");
            match rule_label(trip, anchor) {
                Some(p) => (p, LabelSource::Rule, 1.0),
                None => {
                    let feats = trip_features(trip, poi)?;
                    let proba = model_ii.predict_proba(&feats.0)?;
                    let best = argmax(&proba);
                    (MODEL_II_CLASSES[best], LabelSource::Model, proba[best])
                }
            }
        } else {
            let feats = trip_features(trip, poi)?;
            let proba = model_i.predict_proba(&feats.0)?;
            let best = argmax(&proba);
            (
                Purpose::from_index(best).expect("4-class model"),
                LabelSource::Model,
                proba[best],
            )
        };
        decisions.push(PurposeDecision {
            user_id: trip.user_id.clone(),
            date: trip.service_date,
            trip_seq,
            purpose,
            label_source,
            confidence,
        });
    }
    Ok(decisions)
}

/// A day chain ready for stage 2: features plus identification.
#[derive(Debug, Clone)]
pub struct ChainRow {
    pub user_id: String,
    pub date: NaiveDate,
}

/// Build chain features for card users from trips with assigned purposes.
/// Returns the feature matrix and the (user, date) key per row, in
/// canonical order.
pub fn card_chain_features(
    trips: &[Trip],
    anchors: &BTreeMap<String, AnchorResult>,
    registry: &StopRegistry,
    grid: &Grid,
    max_trips: usize,
) -> Result<(FeatureMatrix, Vec<ChainRow>)> {
    let mut chains: BTreeMap<(&str, NaiveDate), Vec<&Trip>> = BTreeMap::new();
    for trip in trips {
        chains
            .entry((trip.user_id.as_str(), trip.service_date))
            .or_default()
            .push(trip);
    }
    let mut features = FeatureMatrix::new(CHAIN_FEATURE_COUNT);
    let mut keys = Vec::with_capacity(chains.len());
    for ((user, date), day_trips) in chains {
        let coords = anchor_coords(anchors.get(user), registry);
        let truncated: Vec<&Trip> = day_trips.into_iter().take(max_trips).collect();
        let row = chain_features(&truncated, &coords, grid)?;
        features.push_row(&row.0)?;
        keys.push(ChainRow {
            user_id: user.to_string(),
            date,
        });
    }
    Ok((features, keys))
}

fn anchor_coords(anchor: Option<&AnchorResult>, registry: &StopRegistry) -> AnchorCoords {
    match anchor {
        None => AnchorCoords::default(),
        Some(a) => AnchorCoords {
            home: a.home_stop.as_deref().and_then(|s| registry.coords(s)),
            work: a.work_stop.as_deref().and_then(|s| registry.coords(s)),
        },
    }
}

/// Stage-2 training sets from survey chains: one labeled row per respondent
/// (survey covers one day each) for each of the three attributes.
pub struct SocioTrainingSets {
    pub features: FeatureMatrix,
    pub age_labels: Vec<usize>,
    pub job_labels: Vec<usize>,
    pub income_labels: Vec<usize>,
}

pub fn stage2_training_sets(
    survey: &[SurveyRecord],
    registry: &StopRegistry,
    grid: &Grid,
    max_trips: usize,
) -> Result<SocioTrainingSets> {
    let mut sets = SocioTrainingSets {
        features: FeatureMatrix::new(CHAIN_FEATURE_COUNT),
        age_labels: Vec::new(),
        job_labels: Vec::new(),
        income_labels: Vec::new(),
    };
    for record in survey {
        let trips = survey_to_trips(record, registry);
        if trips.is_empty() {
            continue;
        }
        let refs: Vec<&Trip> = trips.iter().take(max_trips).collect();
        let coords = AnchorCoords {
            home: Some(record.person.home),
            work: record.person.work,
        };
        let row = chain_features(&refs, &coords, grid)?;
        sets.features.push_row(&row.0)?;
        sets.age_labels.push(record.person.age_band.index());
        sets.job_labels.push(record.person.job_status.index());
        sets.income_labels.push(record.person.income_band.index());
    }
    if sets.features.is_empty() {
        return Err(Error::Degenerate("no survey chains to train on".into()));
    }
    Ok(sets)
}

/// Per-day socio-economic predictions for one chain row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocioDayPrediction {
    pub user_id: String,
    pub date: NaiveDate,
    pub age_probs: Vec<f64>,
    pub job_probs: Vec<f64>,
    pub income_probs: Vec<f64>,
}

/// Run the three attribute models over card chains.
pub fn stage2_socio(
    chains: &FeatureMatrix,
    keys: &[ChainRow],
    age_model: &TreeEnsemble,
    job_model: &TreeEnsemble,
    income_model: &TreeEnsemble,
) -> Result<Vec<SocioDayPrediction>> {
    if chains.is_empty() {
        return Err(Error::Degenerate("no day chains to infer on".into()));
    }
    for model in [age_model, job_model, income_model] {
        if model.rounds() == 0 {
            return Err(Error::Model("socio model is untrained".into()));
        }
    }
    let age = age_model.predict_proba_batch(chains)?;
    let job = job_model.predict_proba_batch(chains)?;
    let income = income_model.predict_proba_batch(chains)?;
    Ok(keys
        .iter()
        .enumerate()
        .map(|(i, key)| SocioDayPrediction {
            user_id: key.user_id.clone(),
            date: key.date,
            age_probs: age[i].clone(),
            job_probs: job[i].clone(),
            income_probs: income[i].clone(),
        })
        .collect())
}

/// Majority vote over per-day hard labels. Ties break to the band with the
/// higher mean predicted probability across the user's days, then to band
/// order.
pub fn majority_vote(day_probs: &[Vec<f64>]) -> Result<usize> {
    if day_probs.is_empty() {
        return Err(Error::Degenerate("majority vote over zero days".into()));
    }
    let n_classes = day_probs[0].len();
    let mut counts = vec![0usize; n_classes];
    let mut mean_probs = vec![0.0; n_classes];
    for probs in day_probs {
        counts[argmax(probs)] += 1;
        for (c, &p) in probs.iter().enumerate() {
            mean_probs[c] += p;
        }
    }
    for p in mean_probs.iter_mut() {
        *p /= day_probs.len() as f64;
    }
    let mut best = 0usize;
    for c in 1..n_classes {
        if counts[c] > counts[best]
            || (counts[c] == counts[best] && mean_probs[c] > mean_probs[best])
        {
            best = c;
        }
    }
    Ok(best)
}

/// Final voted profile for one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: String,
    pub attrs: SocioAttributes,
    pub days_observed: usize,
}

/// Vote per user across their observed days.
pub fn vote_profiles(days: &[SocioDayPrediction]) -> Result<Vec<UserProfile>> {
    let mut by_user: BTreeMap<&str, Vec<&SocioDayPrediction>> = BTreeMap::new();
    for d in days {
        by_user.entry(d.user_id.as_str()).or_default().push(d);
    }
    let mut profiles = Vec::with_capacity(by_user.len());
    for (user, user_days) in by_user {
        let age_probs: Vec<Vec<f64>> = user_days.iter().map(|d| d.age_probs.clone()).collect();
        let job_probs: Vec<Vec<f64>> = user_days.iter().map(|d| d.job_probs.clone()).collect();
        let income_probs: Vec<Vec<f64>> =
            user_days.iter().map(|d| d.income_probs.clone()).collect();
        profiles.push(UserProfile {
            user_id: user.to_string(),
            attrs: SocioAttributes {
                age_band: AgeBand::from_index(majority_vote(&age_probs)?).expect("3 bands"),
                job_status: JobStatus::from_index(majority_vote(&job_probs)?).expect("3 bands"),
                income_band: IncomeBand::from_index(majority_vote(&income_probs)?)
                    .expect("4 bands"),
            },
            days_observed: user_days.len(),
        });
    }
    Ok(profiles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::RideRecord;

    fn trip(user: &str, day: u32, dep: u32, from: &str, to: &str) -> Trip {
        let date = NaiveDate::from_ymd_opt(2023, 10, day).unwrap();
        Trip {
            user_id: user.into(),
            service_date: date,
            legs: vec![RideRecord {
                user_id: user.into(),
                service_date: date,
                route_id: "R".into(),
                board_time: dep,
                alight_time: dep + 1200,
                board_stop: from.into(),
                alight_stop: to.into(),
                board_lon: 120.01,
                board_lat: 30.01,
                alight_lon: 120.05,
                alight_lat: 30.05,
            }],
            purpose: None,
            label_source: LabelSource::None,
        }
    }

    fn anchored_result(user: &str, home: &str, work: &str) -> AnchorResult {
        AnchorResult {
            user_id: user.into(),
            home_stop: Some(home.into()),
            work_stop: Some(work.into()),
            home_freq: 0.9,
            work_freq: 0.8,
            qualifying_days: 5,
        }
    }

    fn toy_model(n_classes: usize) -> TreeEnsemble {
        // Single-round model with single-leaf trees slightly favoring class 0.
        let trees: Vec<crate::gbdt::Tree> = (0..n_classes)
            .map(|c| {
                crate::gbdt::Tree::from_nodes(vec![crate::gbdt::Node::Leaf {
                    value: if c == 0 { 0.2 } else { 0.0 },
                    cover: 1.0,
                }])
            })
            .collect();
        TreeEnsemble::from_parts(
            n_classes,
            TRIP_FEATURE_COUNT,
            vec![0.0; n_classes],
            vec![trees],
            TrainConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn rule_dominates_models_for_anchored_users() {
        let trips = vec![
            trip("u1", 9, 27_000, "H", "W"),
            trip("u1", 9, 64_000, "W", "H"),
            trip("u1", 9, 70_000, "H", "M"),
        ];
        let mut anchors = BTreeMap::new();
        anchors.insert("u1".to_string(), anchored_result("u1", "H", "W"));
        let decisions = stage1_purpose(
            &trips,
            &anchors,
            &toy_model(4),
            &toy_model(2),
            &PoiTable::new(),
        )
        .unwrap();
        assert_eq!(decisions.len(), 3);
        assert_eq!(decisions[0].purpose, Purpose::Work);
        assert_eq!(decisions[0].label_source, LabelSource::Rule);
        assert_eq!(decisions[1].purpose, Purpose::Home);
        assert_eq!(decisions[2].label_source, LabelSource::Model);
        assert!(matches!(decisions[2].purpose, Purpose::Se | Purpose::Medical));
        assert_eq!(decisions[2].trip_seq, 3);
    }

    #[test]
    fn non_anchored_users_use_four_classes() {
        let trips = vec![trip("u2", 9, 40_000, "A", "B")];
        let anchors = BTreeMap::new();
        let decisions = stage1_purpose(
            &trips,
            &anchors,
            &toy_model(4),
            &toy_model(2),
            &PoiTable::new(),
        )
        .unwrap();
        assert_eq!(decisions[0].label_source, LabelSource::Model);
        assert_eq!(decisions[0].purpose, Purpose::Work, "toy model favors class 0");
    }

    #[test]
    fn every_trip_gets_exactly_one_decision() {
        let trips = vec![
            trip("u1", 9, 27_000, "H", "W"),
            trip("u1", 10, 27_000, "H", "X"),
            trip("u2", 9, 40_000, "A", "B"),
        ];
        let mut anchors = BTreeMap::new();
        anchors.insert("u1".to_string(), anchored_result("u1", "H", "W"));
        let decisions = stage1_purpose(
            &trips,
            &anchors,
            &toy_model(4),
            &toy_model(2),
            &PoiTable::new(),
        )
        .unwrap();
        assert_eq!(decisions.len(), trips.len());
        assert!(decisions.iter().all(|d| d.confidence > 0.0));
    }

    #[test]
    fn vote_majority_and_ties() {
        // [A, A, B] -> A
        let days = vec![
            vec![0.8, 0.2],
            vec![0.7, 0.3],
            vec![0.1, 0.9],
        ];
        assert_eq!(majority_vote(&days).unwrap(), 0);

        // single day
        assert_eq!(majority_vote(&[vec![0.2, 0.8]]).unwrap(), 1);

        // [A, B] tie: A has the higher mean probability
        let tie = vec![vec![0.7, 0.3], vec![0.4, 0.6]];
        assert_eq!(majority_vote(&tie).unwrap(), 0);

        // exact mean tie falls back to band order
        let exact = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        assert_eq!(majority_vote(&exact).unwrap(), 0);

        assert!(majority_vote(&[]).is_err());
    }

    #[test]
    fn vote_is_permutation_invariant_for_strict_majorities() {
        let mut days = vec![
            vec![0.9, 0.1],
            vec![0.8, 0.2],
            vec![0.2, 0.8],
        ];
        let a = majority_vote(&days).unwrap();
        days.reverse();
        assert_eq!(majority_vote(&days).unwrap(), a);
    }

    #[test]
    fn registry_nearest_matches_exact_coordinates() {
        let trips = vec![trip("u", 9, 27_000, "S1", "S2")];
        let registry = StopRegistry::from_trips(&trips);
        assert_eq!(registry.nearest(120.01, 30.01), Some("S1"));
        assert_eq!(registry.nearest(120.049, 30.049), Some("S2"));
    }
}

//! End-to-end run orchestration and the per-subcommand entry points used by
//! the CLI. `run_all` executes every stage in memory and writes all
//! artifacts; the individual commands read their inputs from the artifact
//! files so stages can be re-run and chained.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use crate::anchors::{AnchorConfig, AnchorResult};
use crate::error::{Error, Result};
use crate::features::{
    chain_feature_groups, trip_feature_groups, FeatureMatrix, CHAIN_FEATURE_NAMES,
    TRIP_FEATURE_NAMES,
};
use crate::explain::{mean_abs_shap, write_attribution_csv};
use crate::gbdt::TreeEnsemble;
use crate::ingest::{
    load_grid, merge_transfers_grouped, parse_poi, parse_raster, parse_rides, parse_survey,
    Grid, LabelSource, ParseOptions, PoiTable, SurveyRecord, Trip,
};
use crate::selftrain::write_iteration_log;
use crate::synth::{parse_truth, score_attributes, score_purposes, AttributePrediction, PurposePrediction, TruthRecord};

use super::artifacts::{
    anchors_from_csv, anchors_to_csv, hash_file, open_file, profiles_from_csv, profiles_to_csv,
    purposes_from_csv, purposes_to_csv, socio_days_from_csv, socio_days_to_csv, trips_from_csv,
    trips_to_csv, ArtifactWriter, EvaluationReport, Manifest, Stage1Report, Stage2Report,
};
use super::stages::{
    card_chain_features, detect_all_anchors, self_train, stage1_purpose, stage1_unlabeled_sets,
    stage2_socio, stage2_training_sets, train_with_split, vote_profiles, PurposeDecision,
    PurposeTrainingSet, StopRegistry, TrainedModel,
};
use super::types::{AgeBand, IncomeBand, JobStatus, Purpose};
use super::RunConfig;

const MANIFEST_VERSION: u32 = 1;

struct StageTimer {
    timings: Vec<(String, u64)>,
}

impl StageTimer {
    fn new() -> StageTimer {
        StageTimer { timings: Vec::new() }
    }

    fn run<T>(&mut self, name: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        log::info!("stage {name} starting");
        let out = f().map_err(|e| e.in_stage(name))?;
        let elapsed = start.elapsed().as_millis() as u64;
        log::info!("stage {name} done in {elapsed} ms");
        self.timings.push((name.to_string(), elapsed));
        Ok(out)
    }
}

/// Loaded static inputs shared by several stages.
pub struct Inputs {
    pub survey: Vec<SurveyRecord>,
    pub poi: PoiTable,
    pub grid: Grid,
}

pub fn load_inputs(config: &RunConfig) -> Result<Inputs> {
    let survey = parse_survey(open_file(&config.paths.survey)?)?;
    let poi = parse_poi(open_file(&config.paths.poi)?)?;
    let spec = config.grid.spec()?;
    let population = parse_raster(open_file(&config.paths.grid_pop)?)?;
    let land_price = parse_raster(open_file(&config.paths.grid_lp)?)?;
    let grid = load_grid(&population, &land_price, &spec)?;
    Ok(Inputs { survey, poi, grid })
}

fn load_card_rides(config: &RunConfig) -> Result<(Vec<crate::ingest::RideRecord>, crate::ingest::RejectionReport)> {
    let options = ParseOptions {
        bbox: Some(config.grid.bbox()),
        ..ParseOptions::default()
    };
    parse_rides(open_file(&config.paths.rides)?, &options)
}

fn anchor_config(config: &RunConfig) -> AnchorConfig {
    AnchorConfig {
        cutoff: config.thresholds.anchor_cutoff_s,
        threshold: config.thresholds.anchor_freq,
        min_days: config.thresholds.anchor_min_days,
    }
}

fn anchors_map(anchors: Vec<AnchorResult>) -> BTreeMap<String, AnchorResult> {
    anchors.into_iter().map(|a| (a.user_id.clone(), a)).collect()
}

/// Attach stage-1 decisions back onto the trip list (same order).
fn assign_purposes(trips: &mut [Trip], decisions: &[PurposeDecision]) -> Result<()> {
    if trips.len() != decisions.len() {
        return Err(Error::InvalidData(format!(
            "{} trips but {} purpose decisions",
            trips.len(),
            decisions.len()
        )));
    }
    for (trip, decision) in trips.iter_mut().zip(decisions) {
        if trip.user_id != decision.user_id || trip.service_date != decision.date {
            return Err(Error::InvalidData(
                "purpose decisions out of order with trips".into(),
            ));
        }
        trip.purpose = Some(decision.purpose);
        trip.label_source = decision.label_source;
    }
    Ok(())
}

fn train_socio_models(
    inputs: &Inputs,
    registry: &StopRegistry,
    config: &RunConfig,
) -> Result<(TrainedModel, TrainedModel, TrainedModel)> {
    let sets = stage2_training_sets(
        &inputs.survey,
        registry,
        &inputs.grid,
        config.thresholds.max_trips_per_day,
    )?;
    let age_names: Vec<String> = AgeBand::ALL.iter().map(|b| b.as_str().to_string()).collect();
    let job_names: Vec<String> = JobStatus::ALL.iter().map(|b| b.as_str().to_string()).collect();
    let income_names: Vec<String> =
        IncomeBand::ALL.iter().map(|b| b.as_str().to_string()).collect();

    let mk = |labels: &[usize], n: usize, names: &[String], salt: u64| -> Result<TrainedModel> {
        let set = PurposeTrainingSet {
            features: sets.features.clone(),
            labels: labels.to_vec(),
        };
        train_with_split(
            &set,
            n,
            names,
            &config.socio_train,
            &config.socio_grid,
            config.split_fraction,
            config.seed.wrapping_add(salt),
        )
    };
    let age = mk(&sets.age_labels, 3, &age_names, 11)?;
    let job = mk(&sets.job_labels, 3, &job_names, 12)?;
    let income = mk(&sets.income_labels, 4, &income_names, 13)?;
    Ok((age, job, income))
}

/// Execute the full pipeline and return the manifest.
pub fn run_all(config: &RunConfig) -> Result<Manifest> {
    config.validate()?;
    let mut timer = StageTimer::new();
    let mut writer = ArtifactWriter::new(&config.paths.out_dir)?;

    let mut input_hashes = BTreeMap::new();
    let mut hash_input = |name: &str, path: &Path| -> Result<()> {
        input_hashes.insert(name.to_string(), hash_file(path).map_err(|e| {
            Error::InvalidData(format!("cannot hash input {}: {e}", path.display()))
        })?);
        Ok(())
    };
    hash_input("rides", &config.paths.rides)?;
    hash_input("survey", &config.paths.survey)?;
    hash_input("poi", &config.paths.poi)?;
    hash_input("grid_pop", &config.paths.grid_pop)?;
    hash_input("grid_lp", &config.paths.grid_lp)?;
    if let Some(truth) = &config.paths.truth {
        hash_input("truth", truth)?;
    }

    // Ingest: parse, validate, merge transfers.
    let (inputs, mut card_trips, rejections) = timer.run("ingest", || {
        let inputs = load_inputs(config)?;
        let (rides, rejections) = load_card_rides(config)?;
        let trips = merge_transfers_grouped(rides, config.thresholds.transfer_s)?;
        Ok((inputs, trips, rejections))
    })?;
    writer.write("trips.csv", &trips_to_csv(&card_trips)?)?;
    writer.write("rejections.csv", &rejections_csv(&rejections)?)?;

    // Anchors per card user; survey users anchor via their reported fields.
    let anchors = timer.run("anchors", || {
        Ok(detect_all_anchors(&card_trips, &anchor_config(config)))
    })?;
    writer.write("anchors.csv", &anchors_to_csv(&anchors)?)?;
    let anchors = anchors_map(anchors);
    let registry = StopRegistry::from_trips(&card_trips);

    // Stage-1 initial models with held-out reports.
    let (model_i, model_ii) = timer.run("train-purpose", || {
        super::stages::train_stage1(&inputs.survey, &registry, &inputs.poi, config)
    })?;
    writer.write_json(
        "stage1_split_report.json",
        &Stage1Report {
            model_i: model_i.report.clone(),
            model_ii: model_ii.report.clone(),
            model_i_grid_scores: model_i.grid_scores.clone(),
            model_ii_grid_scores: model_ii.grid_scores.clone(),
        },
    )?;

    // Stage-1 self-training transfer onto the card data.
    let st_config = config.selftrain_config();
    let (final_i, final_ii) = timer.run("selftrain-purpose", || {
        let (unlabeled_i, unlabeled_ii) =
            stage1_unlabeled_sets(&card_trips, &anchors, &inputs.poi)?;
        let final_i = self_train(
            &model_i.train_features,
            &model_i.train_labels,
            4,
            &unlabeled_i,
            &model_i.config,
            &st_config,
            config.selftrain.score_cap,
            config.seed,
        )?;
        let final_ii = self_train(
            &model_ii.train_features,
            &model_ii.train_labels,
            2,
            &unlabeled_ii,
            &model_ii.config,
            &st_config,
            config.selftrain.score_cap,
            config.seed.wrapping_add(1),
        )?;
        Ok((final_i, final_ii))
    })?;
    writer.write("model_purpose_I.json", final_i.model.to_json()?.as_bytes())?;
    writer.write("model_purpose_II.json", final_ii.model.to_json()?.as_bytes())?;
    writer.write("selftrain_purpose_I.csv", &log_csv(&final_i.log)?)?;
    writer.write("selftrain_purpose_II.csv", &log_csv(&final_ii.log)?)?;

    // Purpose inference over every card trip.
    let decisions = timer.run("infer-purpose", || {
        stage1_purpose(
            &card_trips,
            &anchors,
            &final_i.model,
            &final_ii.model,
            &inputs.poi,
        )
    })?;
    writer.write("purposes.csv", &purposes_to_csv(&decisions)?)?;
    assign_purposes(&mut card_trips, &decisions)?;

    // Day-chain features for both populations.
    let (card_chains, chain_keys, socio_models) = timer.run("train-socio", || {
        let (card_chains, chain_keys) = card_chain_features(
            &card_trips,
            &anchors,
            &registry,
            &inputs.grid,
            config.thresholds.max_trips_per_day,
        )?;
        let socio = train_socio_models(&inputs, &registry, config)?;
        Ok((card_chains, chain_keys, socio))
    })?;
    let (age_model, job_model, income_model) = socio_models;
    writer.write_json(
        "stage2_split_report.json",
        &Stage2Report {
            age: age_model.report.clone(),
            job: job_model.report.clone(),
            income: income_model.report.clone(),
        },
    )?;
    let mut chains_csv = Vec::new();
    card_chains.write_csv(&mut chains_csv, &CHAIN_FEATURE_NAMES)?;
    writer.write("features_card_chains.csv", &chains_csv)?;
    let mut chains_bin = Vec::new();
    card_chains.write_binary(&mut chains_bin)?;
    writer.write("features_card_chains.bin", &chains_bin)?;

    // Stage-2 self-training for each attribute model.
    let (final_age, final_job, final_income) = timer.run("selftrain-socio", || {
        let age = self_train(
            &age_model.train_features,
            &age_model.train_labels,
            3,
            &card_chains,
            &age_model.config,
            &st_config,
            config.selftrain.score_cap,
            config.seed.wrapping_add(11),
        )?;
        let job = self_train(
            &job_model.train_features,
            &job_model.train_labels,
            3,
            &card_chains,
            &job_model.config,
            &st_config,
            config.selftrain.score_cap,
            config.seed.wrapping_add(12),
        )?;
        let income = self_train(
            &income_model.train_features,
            &income_model.train_labels,
            4,
            &card_chains,
            &income_model.config,
            &st_config,
            config.selftrain.score_cap,
            config.seed.wrapping_add(13),
        )?;
        Ok((age, job, income))
    })?;
    writer.write("model_age.json", final_age.model.to_json()?.as_bytes())?;
    writer.write("model_job.json", final_job.model.to_json()?.as_bytes())?;
    writer.write("model_income.json", final_income.model.to_json()?.as_bytes())?;
    writer.write("selftrain_age.csv", &log_csv(&final_age.log)?)?;
    writer.write("selftrain_job.csv", &log_csv(&final_job.log)?)?;
    writer.write("selftrain_income.csv", &log_csv(&final_income.log)?)?;

    // Per-day attribute inference and the multi-day vote.
    let days = timer.run("infer-socio", || {
        stage2_socio(
            &card_chains,
            &chain_keys,
            &final_age.model,
            &final_job.model,
            &final_income.model,
        )
    })?;
    writer.write("socio_days.csv", &socio_days_to_csv(&days)?)?;

    let profiles = timer.run("vote", || vote_profiles(&days))?;
    writer.write("profiles.csv", &profiles_to_csv(&profiles)?)?;

    // Attribution tables for the three attribute models.
    timer.run("explain", || {
        let sample = attribution_sample(&card_chains, config.attribution_sample, config.seed);
        let groups = chain_feature_groups();
        for (name, model, class_names) in [
            ("attribution_age.csv", &final_age.model, age_names()),
            ("attribution_job.csv", &final_job.model, job_names()),
            ("attribution_income.csv", &final_income.model, income_names()),
        ] {
            let rows = mean_abs_shap(model, &sample, &class_names, &CHAIN_FEATURE_NAMES, &groups)?;
            let mut buf = Vec::new();
            write_attribution_csv(&mut buf, &rows)?;
            writer.write(name, &buf)?;
        }
        Ok(())
    })?;

    // Optional evaluation against hidden truth.
    if let Some(truth_path) = &config.paths.truth {
        let report = timer.run("evaluate", || {
            let truth = parse_truth(open_file(truth_path)?)?;
            evaluate(&truth, &decisions, &profiles)
        })?;
        writer.write_json("evaluation_report.json", &report)?;
    }

    let manifest = Manifest {
        format_version: MANIFEST_VERSION,
        seed: config.seed,
        config: config.clone(),
        input_hashes,
        output_hashes: writer.output_hashes.clone(),
        stage_timings_ms: timer.timings,
    };
    super::artifacts::write_manifest(&mut writer, &manifest)?;
    Ok(manifest)
}

fn age_names() -> Vec<String> {
    AgeBand::ALL.iter().map(|b| b.as_str().to_string()).collect()
}

fn job_names() -> Vec<String> {
    JobStatus::ALL.iter().map(|b| b.as_str().to_string()).collect()
}

fn income_names() -> Vec<String> {
    IncomeBand::ALL.iter().map(|b| b.as_str().to_string()).collect()
}

fn attribution_sample(chains: &FeatureMatrix, cap: usize, seed: u64) -> FeatureMatrix {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    if chains.n_rows() <= cap || cap == 0 {
        return chains.clone();
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x5ca1_ab1e);
    let mut idx: Vec<usize> = (0..chains.n_rows()).collect();
    idx.shuffle(&mut rng);
    idx.truncate(cap);
    idx.sort_unstable();
    chains.subset(&idx)
}

fn rejections_csv(report: &crate::ingest::RejectionReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["row", "reason"])?;
    for r in &report.rejections {
        w.write_record([r.row.to_string(), r.reason.clone()])?;
    }
    Ok(w.into_inner().map_err(|e| Error::InvalidData(e.to_string()))?)
}

fn log_csv(log: &[crate::selftrain::IterationRecord]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_iteration_log(&mut buf, log)?;
    Ok(buf)
}

/// Score decisions and profiles against the hidden truth.
pub fn evaluate(
    truth: &[TruthRecord],
    decisions: &[PurposeDecision],
    profiles: &[super::stages::UserProfile],
) -> Result<EvaluationReport> {
    let predictions: Vec<PurposePrediction> = decisions
        .iter()
        .map(|d| PurposePrediction {
            user_id: d.user_id.clone(),
            date: d.date,
            trip_seq: d.trip_seq,
            purpose: d.purpose,
        })
        .collect();
    let purpose_report = score_purposes(truth, &predictions)?;

    let truth_by_key: BTreeMap<(&str, chrono::NaiveDate, usize), Purpose> = truth
        .iter()
        .map(|t| ((t.user_id.as_str(), t.date, t.trip_seq), t.purpose))
        .collect();
    let mut rule_total = 0usize;
    let mut rule_correct = 0usize;
    for d in decisions.iter().filter(|d| d.label_source == LabelSource::Rule) {
        let key = (d.user_id.as_str(), d.date, d.trip_seq);
        if let Some(actual) = truth_by_key.get(&key) {
            rule_total += 1;
            if *actual == d.purpose {
                rule_correct += 1;
            }
        }
    }

    let attr_predictions: Vec<AttributePrediction> = profiles
        .iter()
        .map(|p| AttributePrediction {
            user_id: p.user_id.clone(),
            attrs: p.attrs,
        })
        .collect();
    let [age, job, income] = score_attributes(truth, &attr_predictions)?;

    Ok(EvaluationReport {
        purpose: purpose_report,
        rule_subset_accuracy: if rule_total == 0 {
            0.0
        } else {
            rule_correct as f64 / rule_total as f64
        },
        rule_subset_count: rule_total,
        age,
        job,
        income,
    })
}

// ---------------------------------------------------------------------------
// Per-subcommand entry points. Each reads its inputs from the configured
// paths (and earlier commands' artifacts in out_dir) and writes its own
// artifacts, so identical inputs and seed reproduce identical outputs.
// ---------------------------------------------------------------------------

fn out_writer(config: &RunConfig) -> Result<ArtifactWriter> {
    ArtifactWriter::new(&config.paths.out_dir)
}

fn read_trips(config: &RunConfig) -> Result<Vec<Trip>> {
    trips_from_csv(open_file(&config.paths.out_dir.join("trips.csv"))?)
}

fn read_anchors(config: &RunConfig) -> Result<BTreeMap<String, AnchorResult>> {
    Ok(anchors_map(anchors_from_csv(open_file(
        &config.paths.out_dir.join("anchors.csv"),
    )?)?))
}

fn read_model(config: &RunConfig, name: &str) -> Result<TreeEnsemble> {
    let text = super::artifacts::read_to_string(&config.paths.out_dir.join(name))?;
    TreeEnsemble::from_json(&text)
}

pub fn cmd_ingest(config: &RunConfig) -> Result<()> {
    config.validate()?;
    let mut writer = out_writer(config)?;
    let (rides, rejections) = load_card_rides(config)?;
    let trips = merge_transfers_grouped(rides, config.thresholds.transfer_s)?;
    writer.write("trips.csv", &trips_to_csv(&trips)?)?;
    writer.write("rejections.csv", &rejections_csv(&rejections)?)?;
    log::info!(
        "ingest: {} trips from {} accepted rides, {} rejections",
        trips.len(),
        rejections.accepted,
        rejections.rejections.len()
    );
    Ok(())
}

pub fn cmd_anchors(config: &RunConfig) -> Result<()> {
    config.validate()?;
    let mut writer = out_writer(config)?;
    let trips = read_trips(config)?;
    let anchors = detect_all_anchors(&trips, &anchor_config(config));
    writer.write("anchors.csv", &anchors_to_csv(&anchors)?)?;
    Ok(())
}

pub fn cmd_train_purpose(config: &RunConfig) -> Result<()> {
    config.validate()?;
    let mut writer = out_writer(config)?;
    let inputs = load_inputs(config)?;
    let registry = StopRegistry::from_trips(&read_trips(config)?);
    let (model_i, model_ii) =
        super::stages::train_stage1(&inputs.survey, &registry, &inputs.poi, config)?;
    writer.write("model_purpose_I.json", model_i.model.to_json()?.as_bytes())?;
    writer.write("model_purpose_II.json", model_ii.model.to_json()?.as_bytes())?;
    writer.write_json(
        "stage1_split_report.json",
        &Stage1Report {
            model_i: model_i.report,
            model_ii: model_ii.report,
            model_i_grid_scores: model_i.grid_scores,
            model_ii_grid_scores: model_ii.grid_scores,
        },
    )?;
    Ok(())
}

pub fn cmd_selftrain_purpose(config: &RunConfig) -> Result<()> {
    config.validate()?;
    let mut writer = out_writer(config)?;
    let inputs = load_inputs(config)?;
    let trips = read_trips(config)?;
    let anchors = read_anchors(config)?;
    let registry = StopRegistry::from_trips(&trips);
    let (model_i, model_ii) =
        super::stages::train_stage1(&inputs.survey, &registry, &inputs.poi, config)?;
    let (unlabeled_i, unlabeled_ii) = stage1_unlabeled_sets(&trips, &anchors, &inputs.poi)?;
    let st_config = config.selftrain_config();
    let final_i = self_train(
        &model_i.train_features,
        &model_i.train_labels,
        4,
        &unlabeled_i,
        &model_i.config,
        &st_config,
        config.selftrain.score_cap,
        config.seed,
    )?;
    let final_ii = self_train(
        &model_ii.train_features,
        &model_ii.train_labels,
        2,
        &unlabeled_ii,
        &model_ii.config,
        &st_config,
        config.selftrain.score_cap,
        config.seed.wrapping_add(1),
    )?;
    writer.write("model_purpose_I.json", final_i.model.to_json()?.as_bytes())?;
    writer.write("model_purpose_II.json", final_ii.model.to_json()?.as_bytes())?;
    writer.write("selftrain_purpose_I.csv", &log_csv(&final_i.log)?)?;
    writer.write("selftrain_purpose_II.csv", &log_csv(&final_ii.log)?)?;
    Ok(())
}

pub fn cmd_infer_purpose(config: &RunConfig) -> Result<()> {
    config.validate()?;
    let mut writer = out_writer(config)?;
    let inputs = load_inputs(config)?;
    let trips = read_trips(config)?;
    let anchors = read_anchors(config)?;
    let model_i = read_model(config, "model_purpose_I.json")?;
    let model_ii = read_model(config, "model_purpose_II.json")?;
    let decisions = stage1_purpose(&trips, &anchors, &model_i, &model_ii, &inputs.poi)?;
    writer.write("purposes.csv", &purposes_to_csv(&decisions)?)?;
    Ok(())
}

pub fn cmd_train_socio(config: &RunConfig) -> Result<()> {
    config.validate()?;
    let mut writer = out_writer(config)?;
    let inputs = load_inputs(config)?;
    let registry = StopRegistry::from_trips(&read_trips(config)?);
    let (age, job, income) = train_socio_models(&inputs, &registry, config)?;
    writer.write("model_age.json", age.model.to_json()?.as_bytes())?;
    writer.write("model_job.json", job.model.to_json()?.as_bytes())?;
    writer.write("model_income.json", income.model.to_json()?.as_bytes())?;
    writer.write_json(
        "stage2_split_report.json",
        &Stage2Report {
            age: age.report,
            job: job.report,
            income: income.report,
        },
    )?;
    Ok(())
}

fn load_card_chains(
    config: &RunConfig,
    inputs: &Inputs,
) -> Result<(FeatureMatrix, Vec<super::stages::ChainRow>, StopRegistry)> {
    let mut trips = read_trips(config)?;
    let anchors = read_anchors(config)?;
    let registry = StopRegistry::from_trips(&trips);
    let decisions = purposes_from_csv(open_file(&config.paths.out_dir.join("purposes.csv"))?)?;
    assign_purposes(&mut trips, &decisions)?;
    let (chains, keys) = card_chain_features(
        &trips,
        &anchors,
        &registry,
        &inputs.grid,
        config.thresholds.max_trips_per_day,
    )?;
    Ok((chains, keys, registry))
}

pub fn cmd_selftrain_socio(config: &RunConfig) -> Result<()> {
    config.validate()?;
    let mut writer = out_writer(config)?;
    let inputs = load_inputs(config)?;
    let (chains, _, registry) = load_card_chains(config, &inputs)?;
    let (age, job, income) = train_socio_models(&inputs, &registry, config)?;
    let st_config = config.selftrain_config();
    let runs = [
        ("model_age.json", "selftrain_age.csv", &age, 3usize, 11u64),
        ("model_job.json", "selftrain_job.csv", &job, 3, 12),
        ("model_income.json", "selftrain_income.csv", &income, 4, 13),
    ];
    for (model_name, log_name, trained, n_classes, salt) in runs {
        let outcome = self_train(
            &trained.train_features,
            &trained.train_labels,
            n_classes,
            &chains,
            &trained.config,
            &st_config,
            config.selftrain.score_cap,
            config.seed.wrapping_add(salt),
        )?;
        writer.write(model_name, outcome.model.to_json()?.as_bytes())?;
        writer.write(log_name, &log_csv(&outcome.log)?)?;
    }
    Ok(())
}

pub fn cmd_infer_socio(config: &RunConfig) -> Result<()> {
    config.validate()?;
    let mut writer = out_writer(config)?;
    let inputs = load_inputs(config)?;
    let (chains, keys, _) = load_card_chains(config, &inputs)?;
    let days = stage2_socio(
        &chains,
        &keys,
        &read_model(config, "model_age.json")?,
        &read_model(config, "model_job.json")?,
        &read_model(config, "model_income.json")?,
    )?;
    writer.write("socio_days.csv", &socio_days_to_csv(&days)?)?;
    Ok(())
}

pub fn cmd_vote(config: &RunConfig) -> Result<()> {
    config.validate()?;
    let mut writer = out_writer(config)?;
    let days = socio_days_from_csv(open_file(&config.paths.out_dir.join("socio_days.csv"))?)?;
    let profiles = vote_profiles(&days)?;
    writer.write("profiles.csv", &profiles_to_csv(&profiles)?)?;
    Ok(())
}

pub fn cmd_evaluate(config: &RunConfig) -> Result<()> {
    config.validate()?;
    let truth_path = config.paths.truth.as_ref().ok_or_else(|| {
        Error::InvalidConfig("evaluate requires paths.truth to be set".into())
    })?;
    let mut writer = out_writer(config)?;
    let truth = parse_truth(open_file(truth_path)?)?;
    let decisions = purposes_from_csv(open_file(&config.paths.out_dir.join("purposes.csv"))?)?;
    let profiles = profiles_from_csv(open_file(&config.paths.out_dir.join("profiles.csv"))?)?;
    let report = evaluate(&truth, &decisions, &profiles)?;
    writer.write_json("evaluation_report.json", &report)?;
    Ok(())
}

/// Attribution table for one serialized model over a feature file (binary
/// or CSV). Feature names and groups come from the arity when it matches a
/// known layout.
pub fn cmd_explain(
    config: &RunConfig,
    model_path: &Path,
    features_path: &Path,
    class_names: Option<Vec<String>>,
    out_name: &str,
) -> Result<()> {
    config.validate()?;
    let mut writer = out_writer(config)?;
    let model = TreeEnsemble::from_json(&super::artifacts::read_to_string(model_path)?)?;
    let features = if features_path.extension().is_some_and(|e| e == "bin") {
        FeatureMatrix::read_binary(open_file(features_path)?)?
    } else {
        FeatureMatrix::read_csv(open_file(features_path)?)?.0
    };
    let sample = attribution_sample(&features, config.attribution_sample, config.seed);

    let (names, groups): (Vec<&str>, Vec<&str>) = if model.n_features == CHAIN_FEATURE_NAMES.len()
    {
        (
            CHAIN_FEATURE_NAMES.to_vec(),
            chain_feature_groups().to_vec(),
        )
    } else if model.n_features == TRIP_FEATURE_NAMES.len() {
        (TRIP_FEATURE_NAMES.to_vec(), trip_feature_groups().to_vec())
    } else {
        (Vec::new(), Vec::new())
    };
    let generic_names: Vec<String> = (0..model.n_features).map(|i| format!("f{i}")).collect();
    let names: Vec<&str> = if names.is_empty() {
        generic_names.iter().map(|s| s.as_str()).collect()
    } else {
        names
    };
    let groups: Vec<&str> = if groups.is_empty() {
        vec!["other"; model.n_features]
    } else {
        groups
    };
    let class_names = class_names.unwrap_or_else(|| {
        (0..model.n_classes).map(|c| format!("class_{c}")).collect()
    });

    let rows = mean_abs_shap(&model, &sample, &class_names, &names, &groups)?;
    let mut buf = Vec::new();
    write_attribution_csv(&mut buf, &rows)?;
    writer.write(out_name, &buf)?;
    Ok(())
}

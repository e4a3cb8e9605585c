//! End-to-end orchestration: stage-1 purpose inference, stage-2
//! socio-economic inference, multi-day voting, and artifact output.
//!
//! Stages run sequentially; work inside a stage parallelizes per user.
//! Artifacts are written atomically, and a run manifest records the
//! configuration, input/output hashes, and stage timings, so a run is fully
//! reproducible from (inputs, config, seed).

pub mod artifacts;
mod config;
mod run;
mod stages;
mod types;

pub use artifacts::{EvaluationReport, Manifest, Stage1Report, Stage2Report};
pub use config::{GridConfig, PathsConfig, RunConfig, SelfTrainSection, ThresholdsConfig};
pub use run::{
    cmd_anchors, cmd_evaluate, cmd_explain, cmd_infer_purpose, cmd_infer_socio, cmd_ingest,
    cmd_selftrain_purpose, cmd_selftrain_socio, cmd_train_purpose, cmd_train_socio, cmd_vote,
    evaluate, load_inputs, run_all, Inputs,
};
pub use stages::{
    card_chain_features, detect_all_anchors, majority_vote, stage1_purpose,
    stage1_training_sets, stage1_unlabeled_sets, stage2_socio, stage2_training_sets,
    survey_to_trips, train_stage1, vote_profiles, ChainRow, PurposeDecision,
    PurposeTrainingSet, SocioDayPrediction, StopRegistry, TrainedModel, TransferredModel,
    UserProfile, MODEL_II_CLASSES,
};
pub use types::{AgeBand, Gender, IncomeBand, JobStatus, Purpose, SocioAttributes};

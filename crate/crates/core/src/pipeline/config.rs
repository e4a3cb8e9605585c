//! Run configuration: input paths, thresholds, grid geometry, and training
//! settings. Serializable, with validated documented ranges.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gbdt::TrainConfig;
use crate::ingest::{BBox, GridSpec};
use crate::selftrain::SelfTrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathsConfig {
    pub rides: PathBuf,
    pub survey: PathBuf,
    pub poi: PathBuf,
    pub grid_pop: PathBuf,
    pub grid_lp: PathBuf,
    /// Optional hidden ground truth for evaluation.
    pub truth: Option<PathBuf>,
    pub out_dir: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            rides: "rides.csv".into(),
            survey: "survey.csv".into(),
            poi: "poi.csv".into(),
            grid_pop: "grid_pop.csv".into(),
            grid_lp: "grid_lp.csv".into(),
            truth: None,
            out_dir: "out".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThresholdsConfig {
    /// Rides with a smaller boarding gap merge into one trip (seconds).
    pub transfer_s: u32,
    /// Home/work detection cutoff, seconds since midnight (15:00).
    pub anchor_cutoff_s: u32,
    /// Anchor share must strictly exceed this.
    pub anchor_freq: f64,
    pub anchor_min_days: usize,
    /// Fixed pseudo-labeling confidence threshold.
    pub tau: f64,
    /// Floor under the per-class flexible thresholds. 0 is the plain
    /// formula; 0.5 guards against the all-pass case early in training.
    pub tau_min: f64,
    /// Day-chain truncation; the feature layout always reserves 5 slots.
    pub max_trips_per_day: usize,
}

impl Default for ThresholdsConfig {
    fn default() -> Self {
        ThresholdsConfig {
            transfer_s: 3_600,
            anchor_cutoff_s: 54_000,
            anchor_freq: 0.6,
            anchor_min_days: 2,
            tau: 0.9,
            tau_min: 0.5,
            max_trips_per_day: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub min_lon: f64,
    pub min_lat: f64,
    pub max_lon: f64,
    pub max_lat: f64,
    pub cell_km: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        // Exactly a 20x20 grid of 1 km cells anchored at (120, 30): the
        // bounding box of the default synthetic city.
        GridConfig {
            min_lon: 120.0,
            min_lat: 30.0,
            max_lon: 120.207_878_066_949_95,
            max_lat: 30.179_864_321_183_747,
            cell_km: 1.0,
        }
    }
}

impl GridConfig {
    pub fn bbox(&self) -> BBox {
        BBox {
            min_lon: self.min_lon,
            min_lat: self.min_lat,
            max_lon: self.max_lon,
            max_lat: self.max_lat,
        }
    }

    pub fn spec(&self) -> Result<GridSpec> {
        GridSpec::from_bbox(&self.bbox(), self.cell_km)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelfTrainSection {
    pub max_iters: usize,
    /// Silhouette subsample cap used by the transfer scorer.
    pub score_cap: usize,
}

impl Default for SelfTrainSection {
    fn default() -> Self {
        SelfTrainSection {
            max_iters: 4,
            score_cap: 10_000,
        }
    }
}

/// Full pipeline configuration. Scalar fields come before the section
/// tables so the config serializes cleanly to TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    /// Fraction of survey data held out for the split reports.
    pub split_fraction: f64,
    /// Row cap for the attribution tables (seeded subsample).
    pub attribution_sample: usize,
    pub paths: PathsConfig,
    pub thresholds: ThresholdsConfig,
    pub grid: GridConfig,
    pub purpose_train: TrainConfig,
    pub socio_train: TrainConfig,
    /// Optional hyperparameter grid; when non-empty, grid search picks the
    /// purpose training config on a stratified split of the survey data.
    pub purpose_grid: Vec<TrainConfig>,
    pub socio_grid: Vec<TrainConfig>,
    pub selftrain: SelfTrainSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            split_fraction: 0.2,
            attribution_sample: 1_000,
            paths: PathsConfig::default(),
            thresholds: ThresholdsConfig::default(),
            grid: GridConfig::default(),
            purpose_train: TrainConfig {
                rounds: 60,
                max_depth: 5,
                ..TrainConfig::default()
            },
            socio_train: TrainConfig {
                rounds: 60,
                max_depth: 5,
                ..TrainConfig::default()
            },
            purpose_grid: Vec::new(),
            socio_grid: Vec::new(),
            selftrain: SelfTrainSection::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let t = &self.thresholds;
        if t.transfer_s == 0 || t.transfer_s > 6 * 3_600 {
            return Err(Error::InvalidConfig(format!(
                "transfer_s {} outside (0, 21600]",
                t.transfer_s
            )));
        }
        if t.anchor_cutoff_s >= 86_400 {
            return Err(Error::InvalidConfig("anchor_cutoff_s must be within the day".into()));
        }
        if !(t.anchor_freq > 0.0 && t.anchor_freq < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "anchor_freq {} must be in (0, 1)",
                t.anchor_freq
            )));
        }
        if t.anchor_min_days == 0 {
            return Err(Error::InvalidConfig("anchor_min_days must be >= 1".into()));
        }
        if !(t.tau > 0.0 && t.tau < 1.0) {
            return Err(Error::InvalidConfig(format!("tau {} must be in (0, 1)", t.tau)));
        }
        if !(0.0..=t.tau).contains(&t.tau_min) {
            return Err(Error::InvalidConfig(format!(
                "tau_min {} must be in [0, tau]",
                t.tau_min
            )));
        }
        if !(1..=5).contains(&t.max_trips_per_day) {
            return Err(Error::InvalidConfig(
                "max_trips_per_day must be in 1..=5 (the chain layout reserves 5 slots)".into(),
            ));
        }
        if !(0.0..0.9).contains(&self.split_fraction) || self.split_fraction <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "split_fraction {} must be in (0, 0.9)",
                self.split_fraction
            )));
        }
        self.grid.spec()?;
        self.purpose_train.validate()?;
        self.socio_train.validate()?;
        for c in self.purpose_grid.iter().chain(&self.socio_grid) {
            c.validate()?;
        }
        Ok(())
    }

    pub fn selftrain_config(&self) -> SelfTrainConfig {
        SelfTrainConfig {
            tau: self.thresholds.tau,
            tau_min: self.thresholds.tau_min,
            max_iters: self.selftrain.max_iters,
        }
    }
}

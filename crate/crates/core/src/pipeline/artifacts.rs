//! Artifact files: CSV/JSON readers and writers, atomic output, hashing,
//! and the run manifest.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::anchors::AnchorResult;
use crate::error::{Error, Result};
use crate::ingest::{LabelSource, RideRecord, Trip};
use crate::metrics::ClassificationReport;

use super::stages::{PurposeDecision, SocioDayPrediction, UserProfile};
use super::types::{AgeBand, IncomeBand, JobStatus, Purpose, SocioAttributes};
use super::RunConfig;

/// Write a file atomically: temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name()
            .map(|n| n.to_string_lossy().to_string())
            .unwrap_or_else(|| "artifact".into())
    ));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    format!("{:x}", hasher.finalize())
}

pub fn hash_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

/// trips.csv header (merged card trips).
pub const TRIPS_HEADER: [&str; 12] = [
    "user_id",
    "date",
    "trip_seq",
    "dep_time",
    "arr_time",
    "origin_stop",
    "dest_stop",
    "origin_lon",
    "origin_lat",
    "dest_lon",
    "dest_lat",
    "legs",
];

pub fn trips_to_csv(trips: &[Trip]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRIPS_HEADER)?;
    let mut seq: BTreeMap<(&str, NaiveDate), usize> = BTreeMap::new();
    for t in trips {
        let counter = seq.entry((t.user_id.as_str(), t.service_date)).or_insert(0);
        *counter += 1;
        let (olon, olat) = t.origin_coords();
        let (dlon, dlat) = t.dest_coords();
        w.write_record([
            t.user_id.as_str(),
            &t.service_date.format("%Y-%m-%d").to_string(),
            &counter.to_string(),
            &t.dep_time().to_string(),
            &t.arr_time().to_string(),
            t.origin_stop(),
            t.dest_stop(),
            &olon.to_string(),
            &olat.to_string(),
            &dlon.to_string(),
            &dlat.to_string(),
            &t.legs.len().to_string(),
        ])?;
    }
    Ok(w.into_inner().map_err(|e| Error::InvalidData(e.to_string()))?)
}

/// Read trips.csv back into `Trip` values. Each row becomes a single
/// synthetic leg carrying the trip's endpoints; downstream stages only use
/// the derived accessors, so the original leg structure is not needed.
pub fn trips_from_csv<R: Read>(source: R) -> Result<Vec<Trip>> {
    let mut reader = csv::Reader::from_reader(source);
    let headers = reader.headers()?.clone();
    let idx: Vec<usize> = TRIPS_HEADER
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h == *name)
                .ok_or_else(|| Error::MissingColumn(name.to_string()))
        })
        .collect::<Result<_>>()?;
    let mut trips = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let get = |k: usize| -> Result<&str> {
            record
                .get(idx[k])
                .ok_or_else(|| Error::InvalidData(format!("trips row {}: short row", i + 1)))
                .map(str::trim)
        };
        let parse_num = |raw: &str, what: &str| -> Result<f64> {
            raw.parse::<f64>()
                .map_err(|_| Error::InvalidData(format!("trips row {}: bad {what}", i + 1)))
        };
        let user_id = get(0)?.to_string();
        let date = NaiveDate::parse_from_str(get(1)?, "%Y-%m-%d")
            .map_err(|_| Error::InvalidData(format!("trips row {}: bad date", i + 1)))?;
        let dep: u32 = get(3)?
            .parse()
            .map_err(|_| Error::InvalidData(format!("trips row {}: bad dep_time", i + 1)))?;
        let arr: u32 = get(4)?
            .parse()
            .map_err(|_| Error::InvalidData(format!("trips row {}: bad arr_time", i + 1)))?;
        trips.push(Trip {
            user_id: user_id.clone(),
            service_date: date,
            legs: vec![RideRecord {
                user_id,
                service_date: date,
                route_id: "merged".into(),
                board_time: dep,
                alight_time: arr,
                board_stop: get(5)?.to_string(),
                alight_stop: get(6)?.to_string(),
                board_lon: parse_num(get(7)?, "origin_lon")?,
                board_lat: parse_num(get(8)?, "origin_lat")?,
                alight_lon: parse_num(get(9)?, "dest_lon")?,
                alight_lat: parse_num(get(10)?, "dest_lat")?,
            }],
            purpose: None,
            label_source: LabelSource::None,
        });
    }
    Ok(trips)
}

/// anchors.csv: `user_id,home_stop,home_freq,work_stop,work_freq,qualifying_days`.
pub fn anchors_to_csv(anchors: &[AnchorResult]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "user_id",
        "home_stop",
        "home_freq",
        "work_stop",
        "work_freq",
        "qualifying_days",
    ])?;
    for a in anchors {
        w.write_record([
            a.user_id.as_str(),
            a.home_stop.as_deref().unwrap_or(""),
            &format!("{:.6}", a.home_freq),
            a.work_stop.as_deref().unwrap_or(""),
            &format!("{:.6}", a.work_freq),
            &a.qualifying_days.to_string(),
        ])?;
    }
    Ok(w.into_inner().map_err(|e| Error::InvalidData(e.to_string()))?)
}

pub fn anchors_from_csv<R: Read>(source: R) -> Result<Vec<AnchorResult>> {
    let mut reader = csv::Reader::from_reader(source);
    let mut anchors = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let get = |k: usize| -> Result<&str> {
            record
                .get(k)
                .ok_or_else(|| Error::InvalidData(format!("anchors row {}: short row", i + 1)))
                .map(str::trim)
        };
        let opt = |s: &str| -> Option<String> {
            if s.is_empty() {
                None
            } else {
                Some(s.to_string())
            }
        };
        anchors.push(AnchorResult {
            user_id: get(0)?.to_string(),
            home_stop: opt(get(1)?),
            home_freq: get(2)?
                .parse()
                .map_err(|_| Error::InvalidData(format!("anchors row {}: bad home_freq", i + 1)))?,
            work_stop: opt(get(3)?),
            work_freq: get(4)?
                .parse()
                .map_err(|_| Error::InvalidData(format!("anchors row {}: bad work_freq", i + 1)))?,
            qualifying_days: get(5)?
                .parse()
                .map_err(|_| Error::InvalidData(format!("anchors row {}: bad days", i + 1)))?,
        });
    }
    Ok(anchors)
}

/// purposes.csv: `user_id,date,trip_seq,purpose,label_source,confidence`.
pub fn purposes_to_csv(decisions: &[PurposeDecision]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "user_id",
        "date",
        "trip_seq",
        "purpose",
        "label_source",
        "confidence",
    ])?;
    for d in decisions {
        w.write_record([
            d.user_id.as_str(),
            &d.date.format("%Y-%m-%d").to_string(),
            &d.trip_seq.to_string(),
            d.purpose.as_str(),
            d.label_source.as_str(),
            &format!("{:.6}", d.confidence),
        ])?;
    }
    Ok(w.into_inner().map_err(|e| Error::InvalidData(e.to_string()))?)
}

pub fn purposes_from_csv<R: Read>(source: R) -> Result<Vec<PurposeDecision>> {
    let mut reader = csv::Reader::from_reader(source);
    let mut decisions = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let get = |k: usize| -> Result<&str> {
            record
                .get(k)
                .ok_or_else(|| Error::InvalidData(format!("purposes row {}: short row", i + 1)))
                .map(str::trim)
        };
        let source_label = match get(4)? {
            "survey" => LabelSource::Survey,
            "rule" => LabelSource::Rule,
            "model" => LabelSource::Model,
            "pseudo" => LabelSource::Pseudo,
            "none" => LabelSource::None,
            other => {
                return Err(Error::InvalidData(format!(
                    "purposes row {}: unknown label source '{other}'",
                    i + 1
                )))
            }
        };
        decisions.push(PurposeDecision {
            user_id: get(0)?.to_string(),
            date: NaiveDate::parse_from_str(get(1)?, "%Y-%m-%d")
                .map_err(|_| Error::InvalidData(format!("purposes row {}: bad date", i + 1)))?,
            trip_seq: get(2)?
                .parse()
                .map_err(|_| Error::InvalidData(format!("purposes row {}: bad trip_seq", i + 1)))?,
            purpose: Purpose::parse(get(3)?)?,
            label_source: source_label,
            confidence: get(5)?
                .parse()
                .map_err(|_| Error::InvalidData(format!("purposes row {}: bad confidence", i + 1)))?,
        });
    }
    Ok(decisions)
}

/// socio_days.csv: per-day attribute probability rows.
pub fn socio_days_to_csv(days: &[SocioDayPrediction]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = vec!["user_id".into(), "date".into()];
    for i in 0..3 {
        header.push(format!("age_p{i}"));
    }
    for i in 0..3 {
        header.push(format!("job_p{i}"));
    }
    for i in 0..4 {
        header.push(format!("income_p{i}"));
    }
    w.write_record(&header)?;
    for d in days {
        let mut row = vec![d.user_id.clone(), d.date.format("%Y-%m-%d").to_string()];
        for p in d.age_probs.iter().chain(&d.job_probs).chain(&d.income_probs) {
            row.push(format!("{p:.9}"));
        }
        w.write_record(&row)?;
    }
    Ok(w.into_inner().map_err(|e| Error::InvalidData(e.to_string()))?)
}

pub fn socio_days_from_csv<R: Read>(source: R) -> Result<Vec<SocioDayPrediction>> {
    let mut reader = csv::Reader::from_reader(source);
    let mut days = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() < 12 {
            return Err(Error::InvalidData(format!(
                "socio_days row {}: expected 12 columns",
                i + 1
            )));
        }
        let parse = |k: usize| -> Result<f64> {
            record[k]
                .trim()
                .parse()
                .map_err(|_| Error::InvalidData(format!("socio_days row {}: bad value", i + 1)))
        };
        days.push(SocioDayPrediction {
            user_id: record[0].trim().to_string(),
            date: NaiveDate::parse_from_str(record[1].trim(), "%Y-%m-%d")
                .map_err(|_| Error::InvalidData(format!("socio_days row {}: bad date", i + 1)))?,
            age_probs: (2..5).map(parse).collect::<Result<_>>()?,
            job_probs: (5..8).map(parse).collect::<Result<_>>()?,
            income_probs: (8..12).map(parse).collect::<Result<_>>()?,
        });
    }
    Ok(days)
}

/// profiles.csv: `user_id,age_band,job_status,income_band,days_observed`.
pub fn profiles_to_csv(profiles: &[UserProfile]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "user_id",
        "age_band",
        "job_status",
        "income_band",
        "days_observed",
    ])?;
    for p in profiles {
        w.write_record([
            p.user_id.as_str(),
            p.attrs.age_band.as_str(),
            p.attrs.job_status.as_str(),
            p.attrs.income_band.as_str(),
            &p.days_observed.to_string(),
        ])?;
    }
    Ok(w.into_inner().map_err(|e| Error::InvalidData(e.to_string()))?)
}

pub fn profiles_from_csv<R: Read>(source: R) -> Result<Vec<UserProfile>> {
    let mut reader = csv::Reader::from_reader(source);
    let mut profiles = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let get = |k: usize| -> Result<&str> {
            record
                .get(k)
                .ok_or_else(|| Error::InvalidData(format!("profiles row {}: short row", i + 1)))
                .map(str::trim)
        };
        profiles.push(UserProfile {
            user_id: get(0)?.to_string(),
            attrs: SocioAttributes {
                age_band: AgeBand::parse(get(1)?)?,
                job_status: JobStatus::parse(get(2)?)?,
                income_band: IncomeBand::parse(get(3)?)?,
            },
            days_observed: get(4)?
                .parse()
                .map_err(|_| Error::InvalidData(format!("profiles row {}: bad days", i + 1)))?,
        });
    }
    Ok(profiles)
}

/// Split reports for the two stage-1 models (and optionally grid scores).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Stage1Report {
    pub model_i: ClassificationReport,
    pub model_ii: ClassificationReport,
    pub model_i_grid_scores: Vec<f64>,
    pub model_ii_grid_scores: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Stage2Report {
    pub age: ClassificationReport,
    pub job: ClassificationReport,
    pub income: ClassificationReport,
}

/// Evaluation against hidden truth (synthetic runs only).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub purpose: ClassificationReport,
    /// Accuracy over the rule-labeled subset alone.
    pub rule_subset_accuracy: f64,
    pub rule_subset_count: usize,
    pub age: ClassificationReport,
    pub job: ClassificationReport,
    pub income: ClassificationReport,
}

/// The run manifest: configuration echo, input/output hashes, timings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub seed: u64,
    pub config: RunConfig,
    pub input_hashes: BTreeMap<String, String>,
    pub output_hashes: BTreeMap<String, String>,
    pub stage_timings_ms: Vec<(String, u64)>,
}

/// Tracks artifacts written during a run and assembles the manifest.
pub struct ArtifactWriter {
    out_dir: PathBuf,
    pub output_hashes: BTreeMap<String, String>,
}

impl ArtifactWriter {
    pub fn new(out_dir: &Path) -> Result<ArtifactWriter> {
        std::fs::create_dir_all(out_dir)?;
        Ok(ArtifactWriter {
            out_dir: out_dir.to_path_buf(),
            output_hashes: BTreeMap::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.path(name), bytes)?;
        self.output_hashes.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }
}

pub fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| {
        Error::InvalidData(format!("cannot read {}: {e}", path.display()))
    })
}

pub fn open_file(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path)
        .map_err(|e| Error::InvalidData(format!("cannot open {}: {e}", path.display())))
}

pub fn write_manifest(writer: &mut ArtifactWriter, manifest: &Manifest) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(manifest)?;
    bytes.push(b'\n');
    // The manifest itself is not part of the hashed output set.
    write_atomic(&writer.path("manifest.json"), &bytes)?;
    Ok(())
}

//! Home and workplace detection from multi-day boarding regularity.
//!
//! The home candidate on a given day is the origin stop of the first trip
//! departing before the cutoff (15:00 by default); the workplace candidate is
//! the origin stop of the last trip departing after the cutoff. A stop is
//! accepted as an anchor when its share of candidate days exceeds the
//! frequency threshold. The share's denominator counts only days that
//! produced a candidate, so days without (say) pre-cutoff travel do not
//! dilute the evidence.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ingest::Trip;
use crate::pipeline::Purpose;

/// Default detection cutoff: 15:00 as seconds since midnight.
pub const DEFAULT_ANCHOR_CUTOFF: u32 = 54_000;

/// Default frequency threshold; anchors require a share strictly above it.
pub const DEFAULT_ANCHOR_THRESHOLD: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorConfig {
    /// Seconds since midnight splitting "before 3 p.m." from "after 3 p.m.".
    /// A departure at exactly the cutoff qualifies as neither.
    pub cutoff: u32,
    /// Candidate-day share must be strictly greater than this.
    pub threshold: f64,
    /// Minimum candidate days; a single day always has share 1.0 and carries
    /// no regularity evidence.
    pub min_days: usize,
}

impl Default for AnchorConfig {
    fn default() -> Self {
        AnchorConfig {
            cutoff: DEFAULT_ANCHOR_CUTOFF,
            threshold: DEFAULT_ANCHOR_THRESHOLD,
            min_days: 2,
        }
    }
}

/// Detection outcome for one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorResult {
    pub user_id: String,
    pub home_stop: Option<String>,
    pub work_stop: Option<String>,
    /// Share of candidate days held by the best home candidate (0 when no
    /// day produced a candidate).
    pub home_freq: f64,
    pub work_freq: f64,
    /// Number of distinct service dates with at least one trip.
    pub qualifying_days: usize,
}

impl AnchorResult {
    /// Both anchors resolved: the user routes through the rule-first path.
    pub fn is_anchored(&self) -> bool {
        self.home_stop.is_some() && self.work_stop.is_some()
    }
}

/// Pick the winning stop among per-day candidates: highest share wins, ties
/// break to the lowest stop id. Returns `(stop, share)` for the best
/// candidate plus whether it clears the config gate.
fn score_candidates(
    candidates: &[&str],
    config: &AnchorConfig,
) -> (Option<String>, f64) {
    if candidates.is_empty() {
        return (None, 0.0);
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for &stop in candidates {
        *counts.entry(stop).or_insert(0) += 1;
    }
    // BTreeMap iterates in ascending stop order, so keeping a strict `>`
    // comparison implements the lowest-stop-id tie-break.
    let (best_stop, best_count) = counts
        .iter()
        .fold(("", 0usize), |acc, (&stop, &count)| {
            if count > acc.1 {
                (stop, count)
            } else {
                acc
            }
        });
    let freq = best_count as f64 / candidates.len() as f64;
    let accepted = freq > config.threshold && candidates.len() >= config.min_days;
    (
        accepted.then(|| best_stop.to_string()),
        freq,
    )
}

/// Group one user's trips by service date, in date order.
fn by_date(trips: &[Trip]) -> BTreeMap<chrono::NaiveDate, Vec<&Trip>> {
    let mut days: BTreeMap<chrono::NaiveDate, Vec<&Trip>> = BTreeMap::new();
    for trip in trips {
        days.entry(trip.service_date).or_default().push(trip);
    }
    days
}

/// Detect the home stop of one user: daily candidate = origin of the first
/// trip departing strictly before the cutoff.
pub fn detect_home(trips: &[Trip], config: &AnchorConfig) -> (Option<String>, f64) {
    let days = by_date(trips);
    let candidates: Vec<&str> = days
        .values()
        .filter_map(|day| {
            day.iter()
                .filter(|t| t.dep_time() < config.cutoff)
                .min_by_key(|t| (t.dep_time(), t.arr_time(), t.origin_stop().to_string()))
                .map(|t| t.origin_stop())
        })
        .collect();
    score_candidates(&candidates, config)
}

/// Detect the workplace stop of one user: daily candidate = origin of the
/// last trip departing strictly after the cutoff.
pub fn detect_work(trips: &[Trip], config: &AnchorConfig) -> (Option<String>, f64) {
    let days = by_date(trips);
    let candidates: Vec<&str> = days
        .values()
        .filter_map(|day| {
            day.iter()
                .filter(|t| t.dep_time() > config.cutoff)
                .max_by_key(|t| (t.dep_time(), t.arr_time(), t.origin_stop().to_string()))
                .map(|t| t.origin_stop())
        })
        .collect();
    score_candidates(&candidates, config)
}

/// Run both detections for one user's trips.
pub fn detect_anchors(user_id: &str, trips: &[Trip], config: &AnchorConfig) -> AnchorResult {
    let (home_stop, home_freq) = detect_home(trips, config);
    let (work_stop, work_freq) = detect_work(trips, config);
    AnchorResult {
        user_id: user_id.to_string(),
        home_stop,
        work_stop,
        home_freq,
        work_freq,
        qualifying_days: by_date(trips).len(),
    }
}

/// Rule-label a trip against resolved anchors: alighting at the workplace
/// means Work, alighting at home means Home. When home and workplace are the
/// same stop the rule is ambiguous and defers to the model.
pub fn rule_label(trip: &Trip, anchors: &AnchorResult) -> Option<Purpose> {
    let dest = trip.dest_stop();
    let hits_work = anchors.work_stop.as_deref() == Some(dest);
    let hits_home = anchors.home_stop.as_deref() == Some(dest);
    match (hits_work, hits_home) {
        (true, true) => None,
        (true, false) => Some(Purpose::Work),
        (false, true) => Some(Purpose::Home),
        (false, false) => None,
    }
}

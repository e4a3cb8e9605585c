//! Input parsing, validation, and transfer merging.
//!
//! Raw inputs are delimiter-separated text with a header row: card rides,
//! survey responses, station POI profiles, and per-cell population/land-price
//! rasters. Rides that violate record invariants are rejected row-by-row
//! (with a reason) rather than failing the whole parse. Consecutive rides of
//! one user on one day are merged into trips when the boarding gap is under
//! the transfer threshold.

mod grid;
mod poi;
mod rides;
mod survey;

pub use grid::{load_grid, parse_raster, Grid, GridCell, GridSpec, RasterRow};
pub use poi::{parse_poi, write_poi_csv, PoiTable, StationPoiProfile, POI_CATEGORIES};
pub use rides::{
    parse_rides, write_rides_csv, BBox, ParseOptions, Rejection, RejectionReport, RideSchema,
    RIDE_HEADER,
};
pub use survey::{parse_survey, write_survey_csv, SurveyPerson, SurveyRecord, SurveyTrip};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::Purpose;

/// Seconds in one service day.
pub const DAY_SECONDS: u32 = 86_400;

/// Default transfer threshold: gaps under one hour chain rides into a trip.
pub const DEFAULT_TRANSFER_THRESHOLD: u32 = 3_600;

/// One fare swipe: a single boarding/alighting pair on one route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RideRecord {
    pub user_id: String,
    pub service_date: NaiveDate,
    pub route_id: String,
    /// Seconds since midnight, in `[0, 86400)`.
    pub board_time: u32,
    /// Seconds since midnight, strictly greater than `board_time`.
    pub alight_time: u32,
    pub board_stop: String,
    pub alight_stop: String,
    pub board_lon: f64,
    pub board_lat: f64,
    pub alight_lon: f64,
    pub alight_lat: f64,
}

/// Where a trip's purpose label came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    Survey,
    Rule,
    Model,
    Pseudo,
    None,
}

impl LabelSource {
    pub fn as_str(self) -> &'static str {
        match self {
            LabelSource::Survey => "survey",
            LabelSource::Rule => "rule",
            LabelSource::Model => "model",
            LabelSource::Pseudo => "pseudo",
            LabelSource::None => "none",
        }
    }
}

/// One transfer-merged journey: one or more rides chained by short gaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trip {
    pub user_id: String,
    pub service_date: NaiveDate,
    /// Ordered by `board_time`; every inter-leg gap is under the merge threshold.
    pub legs: Vec<RideRecord>,
    pub purpose: Option<Purpose>,
    pub label_source: LabelSource,
}

impl Trip {
    fn from_legs(legs: Vec<RideRecord>) -> Trip {
        debug_assert!(!legs.is_empty());
        Trip {
            user_id: legs[0].user_id.clone(),
            service_date: legs[0].service_date,
            legs,
            purpose: None,
            label_source: LabelSource::None,
        }
    }

    pub fn dep_time(&self) -> u32 {
        self.legs.first().expect("trip has at least one leg").board_time
    }

    pub fn arr_time(&self) -> u32 {
        self.legs.last().expect("trip has at least one leg").alight_time
    }

    pub fn origin_stop(&self) -> &str {
        &self.legs.first().expect("trip has at least one leg").board_stop
    }

    pub fn dest_stop(&self) -> &str {
        &self.legs.last().expect("trip has at least one leg").alight_stop
    }

    pub fn origin_coords(&self) -> (f64, f64) {
        let leg = self.legs.first().expect("trip has at least one leg");
        (leg.board_lon, leg.board_lat)
    }

    pub fn dest_coords(&self) -> (f64, f64) {
        let leg = self.legs.last().expect("trip has at least one leg");
        (leg.alight_lon, leg.alight_lat)
    }
}

/// Merge one user's one-day rides into trips.
///
/// Consecutive rides with `next.board_time - prev.alight_time < threshold`
/// land in the same trip; a gap of exactly `threshold` starts a new trip.
/// The input must be a single (user, date) group sorted by `board_time`;
/// unsorted or mixed input is a caller contract breach and errors.
pub fn merge_transfers(rides: &[RideRecord], threshold: u32) -> Result<Vec<Trip>> {
    if rides.is_empty() {
        return Ok(Vec::new());
    }
    let first = &rides[0];
    for pair in rides.windows(2) {
        if pair[1].user_id != first.user_id || pair[1].service_date != first.service_date {
            return Err(Error::UnsortedInput(format!(
                "merge_transfers expects a single (user, date) group; saw {} on {}",
                pair[1].user_id, pair[1].service_date
            )));
        }
        if pair[1].board_time < pair[0].board_time {
            return Err(Error::UnsortedInput(format!(
                "rides of user {} on {} not sorted by board_time",
                first.user_id, first.service_date
            )));
        }
    }

    let mut trips = Vec::new();
    let mut legs: Vec<RideRecord> = vec![rides[0].clone()];
    for ride in &rides[1..] {
        let prev_alight = legs.last().expect("non-empty legs").alight_time;
        // Signed gap: overlapping legs in dirty data still merge.
        let gap = ride.board_time as i64 - prev_alight as i64;
        if gap < threshold as i64 {
            legs.push(ride.clone());
        } else {
            trips.push(Trip::from_legs(std::mem::take(&mut legs)));
            legs.push(ride.clone());
        }
    }
    trips.push(Trip::from_legs(legs));
    Ok(trips)
}

/// Group rides by (user, date), sort each group by board time, and merge
/// transfers in parallel. Output is in canonical order: (user_id, date,
/// dep_time), independent of thread count.
pub fn merge_transfers_grouped(mut rides: Vec<RideRecord>, threshold: u32) -> Result<Vec<Trip>> {
    rides.sort_by(|a, b| {
        (&a.user_id, a.service_date, a.board_time, a.alight_time).cmp(&(
            &b.user_id,
            b.service_date,
            b.board_time,
            b.alight_time,
        ))
    });

    let mut bounds = Vec::new();
    let mut start = 0usize;
    for i in 1..rides.len() {
        if rides[i].user_id != rides[start].user_id
            || rides[i].service_date != rides[start].service_date
        {
            bounds.push((start, i));
            start = i;
        }
    }
    if !rides.is_empty() {
        bounds.push((start, rides.len()));
    }

    let groups: Vec<Result<Vec<Trip>>> = bounds
        .par_iter()
        .map(|&(lo, hi)| merge_transfers(&rides[lo..hi], threshold))
        .collect();

    let mut trips = Vec::new();
    for group in groups {
        trips.extend(group?);
    }
    Ok(trips)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ride(user: &str, date: &str, board: u32, alight: u32, from: &str, to: &str) -> RideRecord {
        RideRecord {
            user_id: user.to_string(),
            service_date: NaiveDate::parse_from_str(date, "%Y-%m-%d").unwrap(),
            route_id: "R1".to_string(),
            board_time: board,
            alight_time: alight,
            board_stop: from.to_string(),
            alight_stop: to.to_string(),
            board_lon: 120.0,
            board_lat: 30.0,
            alight_lon: 120.05,
            alight_lat: 30.05,
        }
    }

    #[test]
    fn gap_under_threshold_merges() {
        let rides = vec![
            ride("u1", "2023-10-09", 28_800, 30_000, "S1", "S2"),
            ride("u1", "2023-10-09", 31_800, 33_000, "S2", "S3"), // 30 min gap
        ];
        let trips = merge_transfers(&rides, 3600).unwrap();
        assert_eq!(trips.len(), 1);
        assert_eq!(trips[0].legs.len(), 2);
        assert_eq!(trips[0].origin_stop(), "S1");
        assert_eq!(trips[0].dest_stop(), "S3");
        assert_eq!(trips[0].dep_time(), 28_800);
        assert_eq!(trips[0].arr_time(), 33_000);
    }

    #[test]
    fn gap_over_threshold_splits() {
        let rides = vec![
            ride("u1", "2023-10-09", 28_800, 30_000, "S1", "S2"),
            ride("u1", "2023-10-09", 35_400, 36_600, "S2", "S3"), // 90 min gap
        ];
        let trips = merge_transfers(&rides, 3600).unwrap();
        assert_eq!(trips.len(), 2);
    }

    #[test]
    fn gap_exactly_threshold_splits() {
        let rides = vec![
            ride("u1", "2023-10-09", 28_800, 30_000, "S1", "S2"),
            ride("u1", "2023-10-09", 33_600, 34_600, "S2", "S3"), // exactly 3600 s
        ];
        let trips = merge_transfers(&rides, 3600).unwrap();
        assert_eq!(trips.len(), 2, "strict '<' at the threshold");
    }

    #[test]
    fn unsorted_input_errors() {
        let rides = vec![
            ride("u1", "2023-10-09", 31_800, 33_000, "S2", "S3"),
            ride("u1", "2023-10-09", 28_800, 30_000, "S1", "S2"),
        ];
        assert!(matches!(
            merge_transfers(&rides, 3600),
            Err(Error::UnsortedInput(_))
        ));
    }

    #[test]
    fn mixed_group_errors() {
        let rides = vec![
            ride("u1", "2023-10-09", 28_800, 30_000, "S1", "S2"),
            ride("u2", "2023-10-09", 31_800, 33_000, "S2", "S3"),
        ];
        assert!(merge_transfers(&rides, 3600).is_err());
    }

    #[test]
    fn merging_is_idempotent() {
        let rides = vec![
            ride("u1", "2023-10-09", 28_800, 30_000, "S1", "S2"),
            ride("u1", "2023-10-09", 30_500, 31_500, "S2", "S3"),
            ride("u1", "2023-10-09", 60_000, 61_000, "S3", "S1"),
        ];
        let trips = merge_transfers(&rides, 3600).unwrap();
        let flattened: Vec<RideRecord> =
            trips.iter().flat_map(|t| t.legs.iter().cloned()).collect();
        let remerged = merge_transfers(&flattened, 3600).unwrap();
        assert_eq!(trips, remerged);
    }

    #[test]
    fn leg_count_is_conserved() {
        let rides = vec![
            ride("u1", "2023-10-09", 28_800, 30_000, "S1", "S2"),
            ride("u1", "2023-10-09", 30_500, 31_500, "S2", "S3"),
            ride("u1", "2023-10-09", 60_000, 61_000, "S3", "S1"),
            ride("u1", "2023-10-09", 70_000, 71_000, "S1", "S4"),
        ];
        let trips = merge_transfers(&rides, 3600).unwrap();
        let total_legs: usize = trips.iter().map(|t| t.legs.len()).sum();
        assert_eq!(total_legs, rides.len());
    }

    #[test]
    fn smaller_threshold_refines_larger() {
        let rides = vec![
            ride("u1", "2023-10-09", 28_800, 30_000, "S1", "S2"),
            ride("u1", "2023-10-09", 30_900, 31_500, "S2", "S3"),
            ride("u1", "2023-10-09", 33_000, 34_000, "S3", "S4"),
        ];
        let coarse = merge_transfers(&rides, 3600).unwrap();
        let fine = merge_transfers(&rides, 1200).unwrap();
        // Every fine trip's legs are a contiguous sub-range of one coarse trip.
        for f in &fine {
            let contained = coarse.iter().any(|c| {
                f.legs
                    .iter()
                    .all(|leg| c.legs.iter().any(|cl| cl == leg))
            });
            assert!(contained, "fine trips must refine coarse trips");
        }
        assert!(fine.len() >= coarse.len());
    }

    #[test]
    fn grouped_merge_canonical_order() {
        let rides = vec![
            ride("u2", "2023-10-09", 28_800, 30_000, "S1", "S2"),
            ride("u1", "2023-10-10", 28_800, 30_000, "S1", "S2"),
            ride("u1", "2023-10-09", 50_000, 51_000, "S3", "S4"),
            ride("u1", "2023-10-09", 28_800, 30_000, "S1", "S2"),
        ];
        let trips = merge_transfers_grouped(rides, 3600).unwrap();
        let keys: Vec<(String, NaiveDate, u32)> = trips
            .iter()
            .map(|t| (t.user_id.clone(), t.service_date, t.dep_time()))
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert_eq!(trips.len(), 4);
    }
}

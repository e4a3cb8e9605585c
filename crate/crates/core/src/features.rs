//! Feature engineering: per-trip vectors for the purpose models and per-day
//! chain vectors for the socio-economic models.
//!
//! Times and grid indices are encoded as cosines to capture their periodic
//! structure. Day chains cover at most the first five trips; unobserved trip
//! slots and unresolved anchors are filled with the sentinel `-1`, which the
//! tree learner treats as missing.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Grid, PoiTable, Trip, DAY_SECONDS};

/// Sentinel for "no value": padded trip slots and unresolved anchors.
pub const MISSING: f64 = -1.0;

/// Maximum trips per day encoded into a chain vector.
pub const MAX_CHAIN_TRIPS: usize = 5;

/// Per-trip feature count (2 time cosines + duration + 2x7 POI shares).
pub const TRIP_FEATURE_COUNT: usize = 17;

/// Chain feature count (2x4 anchor fields + 5 trips x 11 fields).
pub const CHAIN_FEATURE_COUNT: usize = 63;

/// Trip feature names in canonical column order.
pub const TRIP_FEATURE_NAMES: [&str; TRIP_FEATURE_COUNT] = [
    "cos_boardtime",
    "cos_alighttime",
    "time_interval",
    "board_catering",
    "board_education",
    "board_leisure",
    "board_shopping",
    "board_hospital",
    "board_company",
    "board_residence",
    "alight_catering",
    "alight_education",
    "alight_leisure",
    "alight_shopping",
    "alight_hospital",
    "alight_company",
    "alight_residence",
];

/// Chain feature names in canonical column order.
pub const CHAIN_FEATURE_NAMES: [&str; CHAIN_FEATURE_COUNT] = [
    "Home_X", "Home_Y", "Home_Pop", "Home_LP",
    "Work_X", "Work_Y", "Work_Pop", "Work_LP",
    "Dep_Time1", "Arr_Time1", "Travel_Time1", "Dep_X1", "Dep_Y1", "Arr_X1", "Arr_Y1",
    "Purpose1_1", "Purpose1_2", "Purpose1_3", "Purpose1_4",
    "Dep_Time2", "Arr_Time2", "Travel_Time2", "Dep_X2", "Dep_Y2", "Arr_X2", "Arr_Y2",
    "Purpose2_1", "Purpose2_2", "Purpose2_3", "Purpose2_4",
    "Dep_Time3", "Arr_Time3", "Travel_Time3", "Dep_X3", "Dep_Y3", "Arr_X3", "Arr_Y3",
    "Purpose3_1", "Purpose3_2", "Purpose3_3", "Purpose3_4",
    "Dep_Time4", "Arr_Time4", "Travel_Time4", "Dep_X4", "Dep_Y4", "Arr_X4", "Arr_Y4",
    "Purpose4_1", "Purpose4_2", "Purpose4_3", "Purpose4_4",
    "Dep_Time5", "Arr_Time5", "Travel_Time5", "Dep_X5", "Dep_Y5", "Arr_X5", "Arr_Y5",
    "Purpose5_1", "Purpose5_2", "Purpose5_3", "Purpose5_4",
];

/// Feature-group tag used by attribution reports.
pub const GROUP_SPATIOTEMPORAL: &str = "spatiotemporal";
pub const GROUP_JOBS_HOUSING: &str = "jobs-housing";
pub const GROUP_PURPOSE: &str = "purpose";
pub const GROUP_LAND_USE: &str = "land-use";

/// Group tags for the chain features, parallel to [`CHAIN_FEATURE_NAMES`].
pub fn chain_feature_groups() -> [&'static str; CHAIN_FEATURE_COUNT] {
    let mut groups = [GROUP_SPATIOTEMPORAL; CHAIN_FEATURE_COUNT];
    for g in groups.iter_mut().take(8) {
        *g = GROUP_JOBS_HOUSING;
    }
    for trip in 0..MAX_CHAIN_TRIPS {
        let base = 8 + trip * 11;
        for k in 0..4 {
            groups[base + 7 + k] = GROUP_PURPOSE;
        }
    }
    groups
}

/// Group tags for the trip features, parallel to [`TRIP_FEATURE_NAMES`].
pub fn trip_feature_groups() -> [&'static str; TRIP_FEATURE_COUNT] {
    let mut groups = [GROUP_LAND_USE; TRIP_FEATURE_COUNT];
    groups[0] = GROUP_SPATIOTEMPORAL;
    groups[1] = GROUP_SPATIOTEMPORAL;
    groups[2] = GROUP_SPATIOTEMPORAL;
    groups
}

/// Cosine encoding of a time of day: `cos(2*pi*t/T)`.
pub fn cos_time(t: u32) -> Result<f64> {
    if t >= DAY_SECONDS {
        return Err(Error::InvalidData(format!(
            "time {t} outside [0, {DAY_SECONDS})"
        )));
    }
    Ok((2.0 * std::f64::consts::PI * t as f64 / DAY_SECONDS as f64).cos())
}

/// Cosine encoding of a grid index: `cos(2*pi*index/count)`.
///
/// Deliberately non-injective (distinct cells can share an encoding);
/// generators should keep activity concentrated to limit aliasing.
pub fn cos_grid(index: usize, count: usize) -> Result<f64> {
    if count == 0 || index >= count {
        return Err(Error::InvalidData(format!(
            "grid index {index} outside [0, {count})"
        )));
    }
    Ok((2.0 * std::f64::consts::PI * index as f64 / count as f64).cos())
}

/// Per-trip features in canonical order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripFeatures(pub [f64; TRIP_FEATURE_COUNT]);

/// Per-day chain features in canonical order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainFeatures(pub [f64; CHAIN_FEATURE_COUNT]);

/// Build the trip feature vector. Stops with no POI profile contribute
/// all-zero proportions (distinct from the `-1` "no trip" sentinel).
pub fn trip_features(trip: &Trip, poi: &PoiTable) -> Result<TripFeatures> {
    let mut v = [0.0; TRIP_FEATURE_COUNT];
    v[0] = cos_time(trip.dep_time())?;
    v[1] = cos_time(trip.arr_time())?;
    v[2] = (trip.arr_time() - trip.dep_time()) as f64;

    let lookup = |stop: &str| -> [f64; 7] {
        match poi.get(stop) {
            Some(props) => *props,
            None => {
                log::debug!("no POI profile for stop {stop}; using zero proportions");
                [0.0; 7]
            }
        }
    };
    v[3..10].copy_from_slice(&lookup(trip.origin_stop()));
    v[10..17].copy_from_slice(&lookup(trip.dest_stop()));
    Ok(TripFeatures(v))
}

/// Anchor locations resolved to coordinates, if known.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AnchorCoords {
    pub home: Option<(f64, f64)>,
    pub work: Option<(f64, f64)>,
}

fn anchor_block(grid: &Grid, coords: Option<(f64, f64)>) -> Result<[f64; 4]> {
    match coords {
        None => Ok([MISSING; 4]),
        Some((lon, lat)) => {
            let cell = grid.locate(lon, lat)?;
            Ok([
                cos_grid(cell.x_index, grid.spec.nx)?,
                cos_grid(cell.y_index, grid.spec.ny)?,
                cell.population_density,
                cell.land_price,
            ])
        }
    }
}

/// Build the day-chain feature vector from one user's trips on one day,
/// sorted by departure time and carrying assigned purposes. Only the first
/// five trips are encoded; later trips are ignored.
pub fn chain_features(
    trips: &[&Trip],
    anchors: &AnchorCoords,
    grid: &Grid,
) -> Result<ChainFeatures> {
    if trips.is_empty() {
        return Err(Error::Degenerate("empty day chain".into()));
    }
    for pair in trips.windows(2) {
        if pair[1].dep_time() < pair[0].dep_time() {
            return Err(Error::UnsortedInput(
                "day chain not sorted by departure time".into(),
            ));
        }
    }

    let mut v = [MISSING; CHAIN_FEATURE_COUNT];
    v[0..4].copy_from_slice(&anchor_block(grid, anchors.home)?);
    v[4..8].copy_from_slice(&anchor_block(grid, anchors.work)?);

    for (slot, trip) in trips.iter().take(MAX_CHAIN_TRIPS).enumerate() {
        let purpose = trip.purpose.ok_or_else(|| {
            Error::InvalidData(format!(
                "trip of {} on {} has no purpose assigned",
                trip.user_id, trip.service_date
            ))
        })?;
        let (dep_lon, dep_lat) = trip.origin_coords();
        let (arr_lon, arr_lat) = trip.dest_coords();
        let dep_cell = grid.locate(dep_lon, dep_lat)?;
        let arr_cell = grid.locate(arr_lon, arr_lat)?;

        let base = 8 + slot * 11;
        v[base] = cos_time(trip.dep_time())?;
        v[base + 1] = cos_time(trip.arr_time())?;
        v[base + 2] = (trip.arr_time() - trip.dep_time()) as f64;
        v[base + 3] = cos_grid(dep_cell.x_index, grid.spec.nx)?;
        v[base + 4] = cos_grid(dep_cell.y_index, grid.spec.ny)?;
        v[base + 5] = cos_grid(arr_cell.x_index, grid.spec.nx)?;
        v[base + 6] = cos_grid(arr_cell.y_index, grid.spec.ny)?;
        for k in 0..4 {
            v[base + 7 + k] = 0.0;
        }
        v[base + 7 + purpose.index()] = 1.0;
    }
    Ok(ChainFeatures(v))
}

/// Dense row-major feature matrix, the currency between feature construction
/// and the tree learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

const BINARY_MAGIC: &[u8; 4] = b"FMX1";

impl FeatureMatrix {
    pub fn new(cols: usize) -> FeatureMatrix {
        FeatureMatrix {
            rows: 0,
            cols,
            data: Vec::new(),
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<FeatureMatrix> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut m = FeatureMatrix::new(cols);
        for row in rows {
            m.push_row(&row)?;
        }
        Ok(m)
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.cols {
            return Err(Error::ArityMismatch {
                expected: self.cols,
                got: row.len(),
            });
        }
        self.data.extend_from_slice(row);
        self.rows += 1;
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows_iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn subset(&self, indices: &[usize]) -> FeatureMatrix {
        let mut m = FeatureMatrix::new(self.cols);
        for &i in indices {
            m.push_row(self.row(i)).expect("same arity");
        }
        m
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    /// Append all rows of another matrix with the same arity.
    pub fn extend_from(&mut self, other: &FeatureMatrix) -> Result<()> {
        if other.cols != self.cols {
            return Err(Error::ArityMismatch {
                expected: self.cols,
                got: other.cols,
            });
        }
        self.data.extend_from_slice(&other.data);
        self.rows += other.rows;
        Ok(())
    }

    /// Write as CSV with the given header names.
    pub fn write_csv<W: Write>(&self, writer: W, names: &[&str]) -> Result<()> {
        if names.len() != self.cols {
            return Err(Error::ArityMismatch {
                expected: self.cols,
                got: names.len(),
            });
        }
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(names)?;
        for row in self.rows_iter() {
            let fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            w.write_record(&fields)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(source: R) -> Result<(FeatureMatrix, Vec<String>)> {
        let mut reader = csv::Reader::from_reader(source);
        let names: Vec<String> = reader.headers()?.iter().map(|s| s.to_string()).collect();
        let mut m = FeatureMatrix::new(names.len());
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            let row: Vec<f64> = record
                .iter()
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|_| {
                        Error::InvalidData(format!("feature row {}: bad value '{s}'", i + 1))
                    })
                })
                .collect::<Result<_>>()?;
            m.push_row(&row)?;
        }
        Ok((m, names))
    }

    /// Compact binary dump: magic, u64 row count, u64 column count, then
    /// row-major little-endian f64 values.
    pub fn write_binary<W: Write>(&self, mut writer: W) -> Result<()> {
        writer.write_all(BINARY_MAGIC)?;
        writer.write_all(&(self.rows as u64).to_le_bytes())?;
        writer.write_all(&(self.cols as u64).to_le_bytes())?;
        for v in &self.data {
            writer.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut source: R) -> Result<FeatureMatrix> {
        let mut magic = [0u8; 4];
        source.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(Error::InvalidData("bad feature matrix magic".into()));
        }
        let mut buf8 = [0u8; 8];
        source.read_exact(&mut buf8)?;
        let rows = u64::from_le_bytes(buf8) as usize;
        source.read_exact(&mut buf8)?;
        let cols = u64::from_le_bytes(buf8) as usize;
        let mut data = vec![0.0f64; rows * cols];
        for v in data.iter_mut() {
            source.read_exact(&mut buf8)?;
            *v = f64::from_le_bytes(buf8);
        }
        Ok(FeatureMatrix { rows, cols, data })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{load_grid, GridSpec, LabelSource, RasterRow, RideRecord};
    use crate::pipeline::Purpose;
    use chrono::NaiveDate;

    fn test_grid() -> Grid {
        let spec = GridSpec::from_dims(120.0, 30.0, 8, 8, 1.0).unwrap();
        let raster = |v: f64| -> Vec<RasterRow> {
            (0..8)
                .flat_map(|y| {
                    (0..8).map(move |x| RasterRow {
                        x_index: x,
                        y_index: y,
                        value: v + (y * 8 + x) as f64,
                    })
                })
                .collect()
        };
        load_grid(&raster(100.0), &raster(5000.0), &spec).unwrap()
    }

    fn trip_at(
        grid: &Grid,
        dep: u32,
        arr: u32,
        from_km: (f64, f64),
        to_km: (f64, f64),
        purpose: Option<Purpose>,
    ) -> Trip {
        let date = NaiveDate::from_ymd_opt(2023, 10, 9).unwrap();
        let (blon, blat) = grid.spec.lonlat_at_km(from_km.0, from_km.1);
        let (alon, alat) = grid.spec.lonlat_at_km(to_km.0, to_km.1);
        Trip {
            user_id: "u".into(),
            service_date: date,
            legs: vec![RideRecord {
                user_id: "u".into(),
                service_date: date,
                route_id: "R1".into(),
                board_time: dep,
                alight_time: arr,
                board_stop: "A".into(),
                alight_stop: "B".into(),
                board_lon: blon,
                board_lat: blat,
                alight_lon: alon,
                alight_lat: alat,
            }],
            purpose,
            label_source: LabelSource::None,
        }
    }

    #[test]
    fn cos_time_landmarks() {
        assert_eq!(cos_time(0).unwrap(), 1.0);
        assert!((cos_time(43_200).unwrap() - (-1.0)).abs() < 1e-12);
        assert!(cos_time(21_600).unwrap().abs() < 1e-12);
        assert!(cos_time(86_400).is_err());
    }

    #[test]
    fn cos_time_is_periodic() {
        for t in [0u32, 1, 12_000, 43_200, 86_399] {
            let wrapped = (t + DAY_SECONDS) % DAY_SECONDS;
            assert_eq!(cos_time(t).unwrap(), cos_time(wrapped).unwrap());
        }
    }

    #[test]
    fn cos_grid_landmarks() {
        assert_eq!(cos_grid(0, 20).unwrap(), 1.0);
        assert!((cos_grid(10, 20).unwrap() - (-1.0)).abs() < 1e-12);
        assert!(cos_grid(5, 20).unwrap().abs() < 1e-12);
        assert!(cos_grid(20, 20).is_err());
        assert!(cos_grid(0, 0).is_err());
    }

    #[test]
    fn eight_oclock_trip_features() {
        // cos(2*pi/3) = -0.5 for an 08:00 boarding.
        let grid = test_grid();
        let trip = trip_at(&grid, 28_800, 30_600, (0.5, 0.5), (3.5, 3.5), None);
        let poi = PoiTable::new();
        let f = trip_features(&trip, &poi).unwrap();
        assert!((f.0[0] - (-0.5)).abs() < 1e-12);
        assert_eq!(f.0[2], 1800.0);
    }

    #[test]
    fn missing_poi_profile_yields_zeros() {
        let grid = test_grid();
        let trip = trip_at(&grid, 28_800, 30_600, (0.5, 0.5), (3.5, 3.5), None);
        let f = trip_features(&trip, &PoiTable::new()).unwrap();
        assert!(f.0[3..17].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identical_profiles_mirror_blocks() {
        let grid = test_grid();
        let trip = trip_at(&grid, 28_800, 30_600, (0.5, 0.5), (3.5, 3.5), None);
        let mut poi = PoiTable::new();
        let props = [0.1, 0.2, 0.05, 0.15, 0.0, 0.3, 0.2];
        poi.insert("A".into(), props);
        poi.insert("B".into(), props);
        let f = trip_features(&trip, &poi).unwrap();
        assert_eq!(&f.0[3..10], &f.0[10..17]);
    }

    #[test]
    fn golden_feature_name_order() {
        assert_eq!(TRIP_FEATURE_NAMES.len(), 17);
        assert_eq!(TRIP_FEATURE_NAMES[0], "cos_boardtime");
        assert_eq!(TRIP_FEATURE_NAMES[2], "time_interval");
        assert_eq!(TRIP_FEATURE_NAMES[3], "board_catering");
        assert_eq!(TRIP_FEATURE_NAMES[9], "board_residence");
        assert_eq!(TRIP_FEATURE_NAMES[10], "alight_catering");
        assert_eq!(TRIP_FEATURE_NAMES[16], "alight_residence");

        assert_eq!(CHAIN_FEATURE_NAMES.len(), 63);
        assert_eq!(CHAIN_FEATURE_NAMES[0], "Home_X");
        assert_eq!(CHAIN_FEATURE_NAMES[3], "Home_LP");
        assert_eq!(CHAIN_FEATURE_NAMES[4], "Work_X");
        assert_eq!(CHAIN_FEATURE_NAMES[7], "Work_LP");
        assert_eq!(CHAIN_FEATURE_NAMES[8], "Dep_Time1");
        assert_eq!(CHAIN_FEATURE_NAMES[15], "Purpose1_1");
        assert_eq!(CHAIN_FEATURE_NAMES[18], "Purpose1_4");
        assert_eq!(CHAIN_FEATURE_NAMES[19], "Dep_Time2");
        assert_eq!(CHAIN_FEATURE_NAMES[52], "Dep_Time5");
        assert_eq!(CHAIN_FEATURE_NAMES[62], "Purpose5_4");
    }

    #[test]
    fn two_trip_day_pads_remaining_slots() {
        let grid = test_grid();
        let trips = vec![
            trip_at(&grid, 27_000, 28_800, (0.5, 0.5), (3.5, 3.5), Some(Purpose::Work)),
            trip_at(&grid, 64_000, 65_800, (3.5, 3.5), (0.5, 0.5), Some(Purpose::Home)),
        ];
        let refs: Vec<&Trip> = trips.iter().collect();
        let anchors = AnchorCoords {
            home: Some(grid.spec.lonlat_at_km(0.5, 0.5)),
            work: Some(grid.spec.lonlat_at_km(3.5, 3.5)),
        };
        let f = chain_features(&refs, &anchors, &grid).unwrap();
        // Slots 3..5 are fully -1.
        for slot in 2..5 {
            let base = 8 + slot * 11;
            assert!(f.0[base..base + 11].iter().all(|&v| v == MISSING));
        }
        // One-hot of trip 1 is Work.
        assert_eq!(f.0[15], 1.0);
        assert_eq!(f.0[16] + f.0[17] + f.0[18], 0.0);
        // Anchor block carries grid values.
        assert_eq!(f.0[2], 100.0); // Home_Pop at cell (0,0)
        assert_eq!(f.0[3], 5000.0); // Home_LP at cell (0,0)
    }

    #[test]
    fn seven_trip_day_truncates() {
        let grid = test_grid();
        let trips: Vec<Trip> = (0..7)
            .map(|i| {
                trip_at(
                    &grid,
                    20_000 + i * 8_000,
                    21_000 + i * 8_000,
                    (0.5, 0.5),
                    (3.5, 3.5),
                    Some(Purpose::Se),
                )
            })
            .collect();
        let refs: Vec<&Trip> = trips.iter().collect();
        let f = chain_features(&refs, &AnchorCoords::default(), &grid).unwrap();
        let last_base = 8 + 4 * 11;
        assert_ne!(f.0[last_base], MISSING, "slot 5 encoded");
        assert_eq!(f.0.len(), 63);
    }

    #[test]
    fn missing_work_anchor_is_sentinel() {
        let grid = test_grid();
        let trips = vec![trip_at(
            &grid,
            34_000,
            35_000,
            (0.5, 0.5),
            (3.5, 3.5),
            Some(Purpose::Se),
        )];
        let refs: Vec<&Trip> = trips.iter().collect();
        let anchors = AnchorCoords {
            home: Some(grid.spec.lonlat_at_km(0.5, 0.5)),
            work: None,
        };
        let f = chain_features(&refs, &anchors, &grid).unwrap();
        assert!(f.0[4..8].iter().all(|&v| v == MISSING));
        assert!(f.0[0..4].iter().all(|&v| v != MISSING));
    }

    #[test]
    fn empty_chain_errors() {
        let grid = test_grid();
        assert!(chain_features(&[], &AnchorCoords::default(), &grid).is_err());
    }

    #[test]
    fn chain_values_valid_or_sentinel() {
        let grid = test_grid();
        let trips = vec![
            trip_at(&grid, 27_000, 28_800, (0.5, 0.5), (3.5, 3.5), Some(Purpose::Work)),
            trip_at(&grid, 40_000, 41_000, (3.5, 3.5), (5.5, 1.5), Some(Purpose::Se)),
        ];
        let refs: Vec<&Trip> = trips.iter().collect();
        let f = chain_features(&refs, &AnchorCoords::default(), &grid).unwrap();
        for (i, &v) in f.0.iter().enumerate() {
            assert!(
                v == MISSING || v.is_finite(),
                "field {} is {v}",
                CHAIN_FEATURE_NAMES[i]
            );
        }
        // Observed one-hot blocks sum to exactly 1.
        for slot in 0..2 {
            let base = 8 + slot * 11;
            let sum: f64 = f.0[base + 7..base + 11].iter().sum();
            assert_eq!(sum, 1.0);
        }
    }

    #[test]
    fn determinism_bitwise() {
        let grid = test_grid();
        let trips = vec![
            trip_at(&grid, 27_000, 28_800, (0.5, 0.5), (3.5, 3.5), Some(Purpose::Work)),
            trip_at(&grid, 64_000, 65_800, (3.5, 3.5), (0.5, 0.5), Some(Purpose::Home)),
        ];
        let refs: Vec<&Trip> = trips.iter().collect();
        let anchors = AnchorCoords {
            home: Some(grid.spec.lonlat_at_km(0.5, 0.5)),
            work: Some(grid.spec.lonlat_at_km(3.5, 3.5)),
        };
        let a = chain_features(&refs, &anchors, &grid).unwrap();
        let b = chain_features(&refs, &anchors, &grid).unwrap();
        assert_eq!(
            a.0.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.0.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn matrix_csv_and_binary_round_trip() {
        let m = FeatureMatrix::from_rows(vec![
            vec![1.0, -1.0, 0.25],
            vec![0.5, 2.0, -0.125],
        ])
        .unwrap();
        let mut csv_buf = Vec::new();
        m.write_csv(&mut csv_buf, &["a", "b", "c"]).unwrap();
        let (from_csv, names) = FeatureMatrix::read_csv(csv_buf.as_slice()).unwrap();
        assert_eq!(names, ["a", "b", "c"]);
        assert_eq!(from_csv, m);

        let mut bin_buf = Vec::new();
        m.write_binary(&mut bin_buf).unwrap();
        let from_bin = FeatureMatrix::read_binary(bin_buf.as_slice()).unwrap();
        assert_eq!(from_bin, m);
        assert_eq!(bin_buf.len(), 4 + 16 + 6 * 8);
    }
}

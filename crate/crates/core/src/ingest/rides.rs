//! Ride CSV parsing with per-row validation and a rejection report.

use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{RideRecord, DAY_SECONDS};
use crate::error::{Error, Result};

/// Canonical rides.csv header.
pub const RIDE_HEADER: [&str; 11] = [
    "user_id",
    "date",
    "route",
    "board_time",
    "alight_time",
    "board_stop",
    "alight_stop",
    "board_lon",
    "board_lat",
    "alight_lon",
    "alight_lat",
];

/// Maps the logical ride fields onto column names in the source file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RideSchema {
    pub user_id: String,
    pub date: String,
    pub route: String,
    pub board_time: String,
    pub alight_time: String,
    pub board_stop: String,
    pub alight_stop: String,
    pub board_lon: String,
    pub board_lat: String,
    pub alight_lon: String,
    pub alight_lat: String,
}

impl Default for RideSchema {
    fn default() -> Self {
        RideSchema {
            user_id: "user_id".into(),
            date: "date".into(),
            route: "route".into(),
            board_time: "board_time".into(),
            alight_time: "alight_time".into(),
            board_stop: "board_stop".into(),
            alight_stop: "alight_stop".into(),
            board_lon: "board_lon".into(),
            board_lat: "board_lat".into(),
            alight_lon: "alight_lon".into(),
            alight_lat: "alight_lat".into(),
        }
    }
}

/// Inclusive geographic bounding box in WGS84 degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub min_lon: f64,
    pub min_lat: f64,
    pub max_lon: f64,
    pub max_lat: f64,
}

impl BBox {
    pub fn contains(&self, lon: f64, lat: f64) -> bool {
        lon >= self.min_lon && lon <= self.max_lon && lat >= self.min_lat && lat <= self.max_lat
    }
}

#[derive(Debug, Clone)]
pub struct ParseOptions {
    pub schema: RideSchema,
    pub delimiter: u8,
    /// When set, coordinates outside the box reject the row.
    pub bbox: Option<BBox>,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            schema: RideSchema::default(),
            delimiter: b',',
            bbox: None,
        }
    }
}

/// A rejected input row: 1-based data row index plus the first violated rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub row: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RejectionReport {
    pub rejections: Vec<Rejection>,
    pub accepted: usize,
}

impl RejectionReport {
    pub fn is_empty(&self) -> bool {
        self.rejections.is_empty()
    }
}

struct ColumnIndices {
    user_id: usize,
    date: usize,
    route: usize,
    board_time: usize,
    alight_time: usize,
    board_stop: usize,
    alight_stop: usize,
    board_lon: usize,
    board_lat: usize,
    alight_lon: usize,
    alight_lat: usize,
}

fn find_column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::MissingColumn(name.to_string()))
}

impl ColumnIndices {
    fn resolve(headers: &csv::StringRecord, schema: &RideSchema) -> Result<ColumnIndices> {
        Ok(ColumnIndices {
            user_id: find_column(headers, &schema.user_id)?,
            date: find_column(headers, &schema.date)?,
            route: find_column(headers, &schema.route)?,
            board_time: find_column(headers, &schema.board_time)?,
            alight_time: find_column(headers, &schema.alight_time)?,
            board_stop: find_column(headers, &schema.board_stop)?,
            alight_stop: find_column(headers, &schema.alight_stop)?,
            board_lon: find_column(headers, &schema.board_lon)?,
            board_lat: find_column(headers, &schema.board_lat)?,
            alight_lon: find_column(headers, &schema.alight_lon)?,
            alight_lat: find_column(headers, &schema.alight_lat)?,
        })
    }
}

fn parse_row(record: &csv::StringRecord, cols: &ColumnIndices) -> std::result::Result<RideRecord, String> {
    let field = |idx: usize, name: &str| -> std::result::Result<&str, String> {
        record.get(idx).ok_or_else(|| format!("short row: missing {name}"))
    };

    let user_id = field(cols.user_id, "user_id")?.trim();
    if user_id.is_empty() {
        return Err("empty user id".into());
    }
    let route_id = field(cols.route, "route")?.trim();
    if route_id.is_empty() {
        return Err("empty route id".into());
    }
    let board_stop = field(cols.board_stop, "board_stop")?.trim();
    if board_stop.is_empty() {
        return Err("empty board stop id".into());
    }
    let alight_stop = field(cols.alight_stop, "alight_stop")?.trim();
    if alight_stop.is_empty() {
        return Err("empty alight stop id".into());
    }

    let date_raw = field(cols.date, "date")?.trim();
    let service_date = NaiveDate::parse_from_str(date_raw, "%Y-%m-%d")
        .map_err(|_| format!("unparseable date '{date_raw}'"))?;

    let parse_time = |idx: usize, name: &str| -> std::result::Result<u32, String> {
        let raw = field(idx, name)?.trim();
        raw.parse::<u32>()
            .map_err(|_| format!("unparseable {name} '{raw}'"))
    };
    let board_time = parse_time(cols.board_time, "board_time")?;
    let alight_time = parse_time(cols.alight_time, "alight_time")?;
    if board_time >= DAY_SECONDS {
        return Err(format!("board_time {board_time} beyond end of day"));
    }
    if alight_time >= DAY_SECONDS {
        // Covers rides encoded past midnight; within-day times only.
        return Err(format!("alight_time {alight_time} beyond end of day"));
    }
    if alight_time <= board_time {
        return Err("non-positive duration".into());
    }

    let parse_coord = |idx: usize, name: &str| -> std::result::Result<f64, String> {
        let raw = field(idx, name)?.trim();
        let v = raw
            .parse::<f64>()
            .map_err(|_| format!("unparseable {name} '{raw}'"))?;
        if !v.is_finite() {
            return Err(format!("non-finite {name}"));
        }
        Ok(v)
    };

    Ok(RideRecord {
        user_id: user_id.to_string(),
        service_date,
        route_id: route_id.to_string(),
        board_time,
        alight_time,
        board_stop: board_stop.to_string(),
        alight_stop: alight_stop.to_string(),
        board_lon: parse_coord(cols.board_lon, "board_lon")?,
        board_lat: parse_coord(cols.board_lat, "board_lat")?,
        alight_lon: parse_coord(cols.alight_lon, "alight_lon")?,
        alight_lat: parse_coord(cols.alight_lat, "alight_lat")?,
    })
}

/// Parse a ride CSV stream. Malformed or out-of-range rows are reported with
/// their 1-based data row number and skipped; an unreadable source or a
/// missing mandatory column is fatal. Accepted rows keep file order.
pub fn parse_rides<R: Read>(
    source: R,
    options: &ParseOptions,
) -> Result<(Vec<RideRecord>, RejectionReport)> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .flexible(true)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let cols = ColumnIndices::resolve(&headers, &options.schema)?;

    let mut records = Vec::new();
    let mut report = RejectionReport::default();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                report.rejections.push(Rejection {
                    row: row_no,
                    reason: format!("malformed row: {e}"),
                });
                continue;
            }
        };
        match parse_row(&row, &cols) {
            Ok(ride) => {
                if let Some(bbox) = &options.bbox {
                    let inside = bbox.contains(ride.board_lon, ride.board_lat)
                        && bbox.contains(ride.alight_lon, ride.alight_lat);
                    if !inside {
                        report.rejections.push(Rejection {
                            row: row_no,
                            reason: "coordinates outside bounding box".into(),
                        });
                        continue;
                    }
                }
                records.push(ride);
                report.accepted += 1;
            }
            Err(reason) => report.rejections.push(Rejection { row: row_no, reason }),
        }
    }
    Ok((records, report))
}

/// Serialize rides in the canonical column order and formatting. Parsing the
/// output reproduces the input records exactly, and re-serializing is
/// byte-stable.
pub fn write_rides_csv<W: Write>(writer: W, rides: &[RideRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(RIDE_HEADER)?;
    for r in rides {
        w.write_record([
            r.user_id.as_str(),
            &r.service_date.format("%Y-%m-%d").to_string(),
            r.route_id.as_str(),
            &r.board_time.to_string(),
            &r.alight_time.to_string(),
            r.board_stop.as_str(),
            r.alight_stop.as_str(),
            &r.board_lon.to_string(),
            &r.board_lat.to_string(),
            &r.alight_lon.to_string(),
            &r.alight_lat.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str =
        "user_id,date,route,board_time,alight_time,board_stop,alight_stop,board_lon,board_lat,alight_lon,alight_lat";

    fn parse(body: &str) -> (Vec<RideRecord>, RejectionReport) {
        let text = format!("{HEADER}\n{body}");
        parse_rides(text.as_bytes(), &ParseOptions::default()).unwrap()
    }

    #[test]
    fn empty_file_with_header_is_empty() {
        let (records, report) = parse("");
        assert!(records.is_empty());
        assert!(report.is_empty());
    }

    #[test]
    fn non_positive_duration_rejected() {
        let (records, report) =
            parse("u1,2023-10-09,R1,30000,30000,S1,S2,120.0,30.0,120.1,30.1");
        assert!(records.is_empty());
        assert_eq!(report.rejections.len(), 1);
        assert_eq!(report.rejections[0].row, 1);
        assert_eq!(report.rejections[0].reason, "non-positive duration");
    }

    #[test]
    fn missing_stop_id_rejected_others_kept() {
        let body = "\
u1,2023-10-09,R1,28800,30000,S1,S2,120.0,30.0,120.1,30.1
u1,2023-10-09,R1,31000,32000,S2,,120.1,30.1,120.2,30.2
u2,2023-10-09,R2,28800,30000,S1,S3,120.0,30.0,120.2,30.2
u2,2023-10-09,R2,40000,41000,S3,S1,120.2,30.2,120.0,30.0";
        let (records, report) = parse(body);
        assert_eq!(records.len(), 3);
        assert_eq!(report.rejections.len(), 1);
        assert_eq!(report.rejections[0].row, 2);
        assert_eq!(report.rejections[0].reason, "empty alight stop id");
    }

    #[test]
    fn past_midnight_rejected() {
        let (records, report) =
            parse("u1,2023-10-09,R1,86000,87200,S1,S2,120.0,30.0,120.1,30.1");
        assert!(records.is_empty());
        assert!(report.rejections[0].reason.contains("beyond end of day"));
    }

    #[test]
    fn missing_column_is_fatal() {
        let text = "user_id,date,route\nu1,2023-10-09,R1";
        let err = parse_rides(text.as_bytes(), &ParseOptions::default()).unwrap_err();
        assert!(matches!(err, Error::MissingColumn(_)));
    }

    #[test]
    fn bbox_violation_rejected() {
        let opts = ParseOptions {
            bbox: Some(BBox {
                min_lon: 119.0,
                min_lat: 29.0,
                max_lon: 121.0,
                max_lat: 31.0,
            }),
            ..ParseOptions::default()
        };
        let text = format!(
            "{HEADER}\nu1,2023-10-09,R1,28800,30000,S1,S2,140.0,30.0,120.1,30.1"
        );
        let (records, report) = parse_rides(text.as_bytes(), &opts).unwrap();
        assert!(records.is_empty());
        assert_eq!(
            report.rejections[0].reason,
            "coordinates outside bounding box"
        );
    }

    #[test]
    fn accepted_rows_round_trip_bit_exactly() {
        let body = "\
u1,2023-10-09,R1,28800,30000,S1,S2,120.012345,30.054321,120.1,30.1
u2,2023-10-09,R2,40000,41000,S3,S1,120.25,30.125,120.0,30.0";
        let (records, _) = parse(body);
        let mut buf1 = Vec::new();
        write_rides_csv(&mut buf1, &records).unwrap();
        let (reparsed, report) = parse_rides(buf1.as_slice(), &ParseOptions::default()).unwrap();
        assert!(report.is_empty());
        assert_eq!(records, reparsed);
        let mut buf2 = Vec::new();
        write_rides_csv(&mut buf2, &reparsed).unwrap();
        assert_eq!(buf1, buf2, "canonical serialization is byte-stable");
    }
}

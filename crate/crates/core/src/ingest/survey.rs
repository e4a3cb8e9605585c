//! Resident travel survey parsing.
//!
//! survey.csv is flat: one row per trip, keyed by (person_id, trip_seq), with
//! the person-level fields repeated on every row. Work location columns are
//! empty when the respondent reported none.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::DAY_SECONDS;
use crate::error::{Error, Result};
use crate::pipeline::{AgeBand, Gender, IncomeBand, JobStatus, Purpose};

/// Canonical survey.csv header.
pub const SURVEY_HEADER: [&str; 18] = [
    "person_id",
    "gender",
    "age_band",
    "income_band",
    "job_status",
    "car_ownership",
    "home_lon",
    "home_lat",
    "work_lon",
    "work_lat",
    "trip_seq",
    "dep_time",
    "arr_time",
    "dep_lon",
    "dep_lat",
    "arr_lon",
    "arr_lat",
    "purpose",
];

/// Person-level survey fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyPerson {
    pub person_id: String,
    pub gender: Gender,
    pub age_band: AgeBand,
    pub income_band: IncomeBand,
    pub job_status: JobStatus,
    pub car_ownership: bool,
    pub home: (f64, f64),
    /// Reported workplace/school location; `None` for respondents without one.
    pub work: Option<(f64, f64)>,
}

/// One reported trip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyTrip {
    pub trip_seq: usize,
    pub dep_time: u32,
    pub arr_time: u32,
    pub dep: (f64, f64),
    pub arr: (f64, f64),
    pub purpose: Purpose,
}

/// One respondent with their chronologically ordered trips.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyRecord {
    pub person: SurveyPerson,
    pub trips: Vec<SurveyTrip>,
}

fn col(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::MissingColumn(name.to_string()))
}

/// Parse survey.csv, grouping trip rows per person and validating ordering
/// and field consistency.
pub fn parse_survey<R: Read>(source: R) -> Result<Vec<SurveyRecord>> {
    let mut reader = csv::Reader::from_reader(source);
    let headers = reader.headers()?.clone();
    let idx: Vec<usize> = SURVEY_HEADER
        .iter()
        .map(|name| col(&headers, name))
        .collect::<Result<_>>()?;

    let mut records: Vec<SurveyRecord> = Vec::new();
    // Keyed lookup to allow non-contiguous person rows while keeping first-seen order.
    let mut by_person: std::collections::HashMap<String, usize> = std::collections::HashMap::new();

    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let get = |k: usize| -> Result<&str> {
            record
                .get(idx[k])
                .ok_or_else(|| Error::InvalidData(format!("survey row {row}: short row")))
                .map(|s| s.trim())
        };
        let parse_f64 = |k: usize| -> Result<f64> {
            let raw = get(k)?;
            raw.parse::<f64>().map_err(|_| {
                Error::InvalidData(format!(
                    "survey row {row}: bad {} value '{raw}'",
                    SURVEY_HEADER[k]
                ))
            })
        };
        let parse_time = |k: usize| -> Result<u32> {
            let raw = get(k)?;
            let t = raw.parse::<u32>().map_err(|_| {
                Error::InvalidData(format!(
                    "survey row {row}: bad {} value '{raw}'",
                    SURVEY_HEADER[k]
                ))
            })?;
            if t >= DAY_SECONDS {
                return Err(Error::InvalidData(format!(
                    "survey row {row}: {} {t} beyond end of day",
                    SURVEY_HEADER[k]
                )));
            }
            Ok(t)
        };

        let person_id = get(0)?.to_string();
        if person_id.is_empty() {
            return Err(Error::InvalidData(format!("survey row {row}: empty person id")));
        }

        let work_lon_raw = get(8)?;
        let work_lat_raw = get(9)?;
        let work = match (work_lon_raw.is_empty(), work_lat_raw.is_empty()) {
            (true, true) => None,
            (false, false) => Some((parse_f64(8)?, parse_f64(9)?)),
            _ => {
                return Err(Error::InvalidData(format!(
                    "survey row {row}: work_lon/work_lat must both be set or both empty"
                )))
            }
        };

        let person = SurveyPerson {
            person_id: person_id.clone(),
            gender: Gender::parse(get(1)?)?,
            age_band: AgeBand::parse(get(2)?)?,
            income_band: IncomeBand::parse(get(3)?)?,
            job_status: JobStatus::parse(get(4)?)?,
            car_ownership: match get(5)? {
                "yes" => true,
                "no" => false,
                other => {
                    return Err(Error::InvalidData(format!(
                        "survey row {row}: bad car_ownership '{other}'"
                    )))
                }
            },
            home: (parse_f64(6)?, parse_f64(7)?),
            work,
        };

        let dep_time = parse_time(11)?;
        let arr_time = parse_time(12)?;
        if arr_time <= dep_time {
            return Err(Error::InvalidData(format!(
                "survey row {row}: non-positive trip duration"
            )));
        }
        let trip = SurveyTrip {
            trip_seq: get(10)?.parse::<usize>().map_err(|_| {
                Error::InvalidData(format!("survey row {row}: bad trip_seq"))
            })?,
            dep_time,
            arr_time,
            dep: (parse_f64(13)?, parse_f64(14)?),
            arr: (parse_f64(15)?, parse_f64(16)?),
            purpose: Purpose::parse(get(17)?)?,
        };

        match by_person.get(&person_id) {
            Some(&slot) => {
                let existing = &mut records[slot];
                if existing.person != person {
                    return Err(Error::InvalidData(format!(
                        "survey row {row}: person fields differ from earlier rows of {person_id}"
                    )));
                }
                existing.trips.push(trip);
            }
            None => {
                by_person.insert(person_id, records.len());
                records.push(SurveyRecord {
                    person,
                    trips: vec![trip],
                });
            }
        }
    }

    for rec in &mut records {
        rec.trips.sort_by_key(|t| t.trip_seq);
        for pair in rec.trips.windows(2) {
            if pair[0].trip_seq == pair[1].trip_seq {
                return Err(Error::InvalidData(format!(
                    "person {}: duplicate trip_seq {}",
                    rec.person.person_id, pair[0].trip_seq
                )));
            }
            if pair[1].dep_time < pair[0].arr_time {
                return Err(Error::InvalidData(format!(
                    "person {}: trips not chronologically ordered",
                    rec.person.person_id
                )));
            }
        }
    }
    Ok(records)
}

pub fn write_survey_csv<W: Write>(writer: W, records: &[SurveyRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SURVEY_HEADER)?;
    for rec in records {
        let p = &rec.person;
        let (work_lon, work_lat) = match p.work {
            Some((lon, lat)) => (format!("{lon:.6}"), format!("{lat:.6}")),
            None => (String::new(), String::new()),
        };
        for t in &rec.trips {
            w.write_record([
                p.person_id.as_str(),
                p.gender.as_str(),
                p.age_band.as_str(),
                p.income_band.as_str(),
                p.job_status.as_str(),
                if p.car_ownership { "yes" } else { "no" },
                &format!("{:.6}", p.home.0),
                &format!("{:.6}", p.home.1),
                &work_lon,
                &work_lat,
                &t.trip_seq.to_string(),
                &t.dep_time.to_string(),
                &t.arr_time.to_string(),
                &format!("{:.6}", t.dep.0),
                &format!("{:.6}", t.dep.1),
                &format!("{:.6}", t.arr.0),
                &format!("{:.6}", t.arr.1),
                t.purpose.as_str(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

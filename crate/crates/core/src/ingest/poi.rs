//! Station POI category profiles.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// POI categories in canonical column order.
pub const POI_CATEGORIES: [&str; 7] = [
    "catering",
    "education",
    "leisure",
    "shopping",
    "hospital",
    "company",
    "residence",
];

/// Per-stop POI category fractions. Fractions sum to at most 1; the
/// remainder is an implicit "other" share.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationPoiProfile {
    pub stop_id: String,
    pub proportions: [f64; 7],
}

impl StationPoiProfile {
    pub fn validate(&self) -> Result<()> {
        let mut sum = 0.0;
        for (i, &p) in self.proportions.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidData(format!(
                    "stop {}: {} proportion {} outside [0, 1]",
                    self.stop_id, POI_CATEGORIES[i], p
                )));
            }
            sum += p;
        }
        if sum > 1.0 + 1e-9 {
            return Err(Error::InvalidData(format!(
                "stop {}: proportions sum to {sum} > 1",
                self.stop_id
            )));
        }
        Ok(())
    }
}

/// Lookup table keyed by stop id. Deterministic iteration order.
pub type PoiTable = BTreeMap<String, [f64; 7]>;

/// Parse poi.csv: `stop_id,catering,education,leisure,shopping,hospital,company,residence`.
pub fn parse_poi<R: Read>(source: R) -> Result<PoiTable> {
    let mut reader = csv::Reader::from_reader(source);
    let headers = reader.headers()?.clone();
    if !headers.iter().any(|h| h == "stop_id") {
        return Err(Error::MissingColumn("stop_id".to_string()));
    }
    let stop_idx = headers.iter().position(|h| h == "stop_id").unwrap();
    let mut cat_idx = [0usize; 7];
    for (k, cat) in POI_CATEGORIES.iter().enumerate() {
        cat_idx[k] = headers
            .iter()
            .position(|h| h == *cat)
            .ok_or_else(|| Error::MissingColumn(cat.to_string()))?;
    }

    let mut table = PoiTable::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let stop_id = record
            .get(stop_idx)
            .ok_or_else(|| Error::InvalidData(format!("poi row {}: short row", i + 1)))?
            .trim()
            .to_string();
        if stop_id.is_empty() {
            return Err(Error::InvalidData(format!("poi row {}: empty stop id", i + 1)));
        }
        let mut proportions = [0.0; 7];
        for (k, &idx) in cat_idx.iter().enumerate() {
            let raw = record
                .get(idx)
                .ok_or_else(|| Error::InvalidData(format!("poi row {}: short row", i + 1)))?
                .trim();
            proportions[k] = raw.parse::<f64>().map_err(|_| {
                Error::InvalidData(format!(
                    "poi row {}: bad {} value '{raw}'",
                    i + 1,
                    POI_CATEGORIES[k]
                ))
            })?;
        }
        let profile = StationPoiProfile {
            stop_id: stop_id.clone(),
            proportions,
        };
        profile.validate()?;
        if table.insert(stop_id.clone(), proportions).is_some() {
            return Err(Error::InvalidData(format!(
                "poi row {}: duplicate stop id {stop_id}",
                i + 1
            )));
        }
    }
    Ok(table)
}

pub fn write_poi_csv<W: Write>(writer: W, table: &PoiTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["stop_id"];
    header.extend(POI_CATEGORIES);
    w.write_record(&header)?;
    for (stop, props) in table {
        let mut row = vec![stop.clone()];
        row.extend(props.iter().map(|p| format!("{p:.6}")));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

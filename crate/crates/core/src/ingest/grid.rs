//! Square-cell spatial grid over the study area, carrying population density
//! and land price per cell.

use std::io::Read;

use serde::{Deserialize, Serialize};

use super::BBox;
use crate::error::{Error, Result};

/// Kilometres per degree of latitude (spherical mean-radius Earth).
pub const KM_PER_DEG_LAT: f64 = 111.194_926_644_558_74;

/// One grid cell. `cell_id = y_index * nx + x_index`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub cell_id: usize,
    pub x_index: usize,
    pub y_index: usize,
    /// Persons per square kilometre, non-negative.
    pub population_density: f64,
    /// Currency per square metre, non-negative.
    pub land_price: f64,
}

/// Geometry of the grid: origin at the bounding box south-west corner,
/// half-open square cells of `cell_km` kilometres per side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub min_lon: f64,
    pub min_lat: f64,
    pub cell_km: f64,
    pub nx: usize,
    pub ny: usize,
    km_per_deg_lon: f64,
}

impl GridSpec {
    /// Build from a bounding box; cell counts cover the box (`ceil`).
    pub fn from_bbox(bbox: &BBox, cell_km: f64) -> Result<GridSpec> {
        if cell_km <= 0.0 || !cell_km.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "cell size must be positive, got {cell_km}"
            )));
        }
        if bbox.max_lon <= bbox.min_lon || bbox.max_lat <= bbox.min_lat {
            return Err(Error::InvalidConfig("empty bounding box".into()));
        }
        let center_lat = 0.5 * (bbox.min_lat + bbox.max_lat);
        let km_per_deg_lon = KM_PER_DEG_LAT * center_lat.to_radians().cos();
        let width_km = (bbox.max_lon - bbox.min_lon) * km_per_deg_lon;
        let height_km = (bbox.max_lat - bbox.min_lat) * KM_PER_DEG_LAT;
        // Small tolerance so an exact multiple of the cell size does not gain
        // a spurious extra cell from rounding.
        let nx = ((width_km / cell_km) - 1e-9).ceil().max(1.0) as usize;
        let ny = ((height_km / cell_km) - 1e-9).ceil().max(1.0) as usize;
        Ok(GridSpec {
            min_lon: bbox.min_lon,
            min_lat: bbox.min_lat,
            cell_km,
            nx,
            ny,
            km_per_deg_lon,
        })
    }

    /// Build from explicit cell counts anchored at a south-west origin.
    pub fn from_dims(
        min_lon: f64,
        min_lat: f64,
        nx: usize,
        ny: usize,
        cell_km: f64,
    ) -> Result<GridSpec> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidConfig("grid dimensions must be positive".into()));
        }
        if cell_km <= 0.0 || !cell_km.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "cell size must be positive, got {cell_km}"
            )));
        }
        let approx_height_deg = ny as f64 * cell_km / KM_PER_DEG_LAT;
        let center_lat = min_lat + 0.5 * approx_height_deg;
        let km_per_deg_lon = KM_PER_DEG_LAT * center_lat.to_radians().cos();
        Ok(GridSpec {
            min_lon,
            min_lat,
            cell_km,
            nx,
            ny,
            km_per_deg_lon,
        })
    }

    pub fn cell_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn bbox(&self) -> BBox {
        BBox {
            min_lon: self.min_lon,
            min_lat: self.min_lat,
            max_lon: self.min_lon + self.nx as f64 * self.cell_km / self.km_per_deg_lon,
            max_lat: self.min_lat + self.ny as f64 * self.cell_km / KM_PER_DEG_LAT,
        }
    }

    /// Kilometre offsets east/north of the grid origin.
    pub fn km_offsets(&self, lon: f64, lat: f64) -> (f64, f64) {
        (
            (lon - self.min_lon) * self.km_per_deg_lon,
            (lat - self.min_lat) * KM_PER_DEG_LAT,
        )
    }

    /// Inverse of [`km_offsets`](Self::km_offsets).
    pub fn lonlat_at_km(&self, x_km: f64, y_km: f64) -> (f64, f64) {
        (
            self.min_lon + x_km / self.km_per_deg_lon,
            self.min_lat + y_km / KM_PER_DEG_LAT,
        )
    }

    /// Cell indices containing a point. Cells are half-open: a point on an
    /// interior edge belongs to the higher-index cell. Offsets are snapped
    /// at 1e-9 cells so a point constructed exactly on an edge stays in the
    /// higher cell despite degree/kilometre round-trip error.
    pub fn cell_indices(&self, lon: f64, lat: f64) -> Result<(usize, usize)> {
        let (x_km, y_km) = self.km_offsets(lon, lat);
        let x = (x_km / self.cell_km + 1e-9).floor();
        let y = (y_km / self.cell_km + 1e-9).floor();
        if x < 0.0 || y < 0.0 || x >= self.nx as f64 || y >= self.ny as f64 {
            return Err(Error::OutsideGrid(lon, lat));
        }
        Ok((x as usize, y as usize))
    }
}

/// Fully populated grid: a cell for every (x, y) in `[0, nx) x [0, ny)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Grid {
    pub spec: GridSpec,
    cells: Vec<GridCell>,
}

impl Grid {
    pub fn cells(&self) -> &[GridCell] {
        &self.cells
    }

    pub fn cell_at(&self, x: usize, y: usize) -> Option<&GridCell> {
        if x >= self.spec.nx || y >= self.spec.ny {
            return None;
        }
        Some(&self.cells[y * self.spec.nx + x])
    }

    /// Return the unique cell whose half-open extent contains the point.
    pub fn locate(&self, lon: f64, lat: f64) -> Result<&GridCell> {
        let (x, y) = self.spec.cell_indices(lon, lat)?;
        Ok(&self.cells[y * self.spec.nx + x])
    }
}

/// One raster row: a value at integer cell indices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RasterRow {
    pub x_index: usize,
    pub y_index: usize,
    pub value: f64,
}

/// Parse a raster CSV with header `x_index,y_index,value`.
pub fn parse_raster<R: Read>(source: R) -> Result<Vec<RasterRow>> {
    let mut reader = csv::Reader::from_reader(source);
    let headers = reader.headers()?.clone();
    for col in ["x_index", "y_index", "value"] {
        if !headers.iter().any(|h| h == col) {
            return Err(Error::MissingColumn(col.to_string()));
        }
    }
    let xi = headers.iter().position(|h| h == "x_index").unwrap();
    let yi = headers.iter().position(|h| h == "y_index").unwrap();
    let vi = headers.iter().position(|h| h == "value").unwrap();

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let get = |idx: usize| -> Result<&str> {
            record
                .get(idx)
                .ok_or_else(|| Error::InvalidData(format!("raster row {}: short row", i + 1)))
        };
        let x_index = get(xi)?.trim().parse::<usize>().map_err(|_| {
            Error::InvalidData(format!("raster row {}: bad x_index", i + 1))
        })?;
        let y_index = get(yi)?.trim().parse::<usize>().map_err(|_| {
            Error::InvalidData(format!("raster row {}: bad y_index", i + 1))
        })?;
        let value = get(vi)?.trim().parse::<f64>().map_err(|_| {
            Error::InvalidData(format!("raster row {}: bad value", i + 1))
        })?;
        rows.push(RasterRow {
            x_index,
            y_index,
            value,
        });
    }
    Ok(rows)
}

/// Assemble the grid from population and land-price rasters. Every cell must
/// be covered by both rasters; holes are an error listing the missing cells.
pub fn load_grid(
    population: &[RasterRow],
    land_price: &[RasterRow],
    spec: &GridSpec,
) -> Result<Grid> {
    let fill = |rows: &[RasterRow], what: &str| -> Result<Vec<Option<f64>>> {
        let mut values: Vec<Option<f64>> = vec![None; spec.cell_count()];
        for row in rows {
            if row.x_index >= spec.nx || row.y_index >= spec.ny {
                return Err(Error::InvalidData(format!(
                    "{what} raster cell ({}, {}) outside {}x{} grid",
                    row.x_index, row.y_index, spec.nx, spec.ny
                )));
            }
            if !row.value.is_finite() || row.value < 0.0 {
                return Err(Error::InvalidData(format!(
                    "{what} raster cell ({}, {}): value {} must be finite and non-negative",
                    row.x_index, row.y_index, row.value
                )));
            }
            let idx = row.y_index * spec.nx + row.x_index;
            if values[idx].is_some() {
                return Err(Error::InvalidData(format!(
                    "{what} raster cell ({}, {}) duplicated",
                    row.x_index, row.y_index
                )));
            }
            values[idx] = Some(row.value);
        }
        Ok(values)
    };

    let pop = fill(population, "population")?;
    let lp = fill(land_price, "land price")?;

    let mut missing = Vec::new();
    for y in 0..spec.ny {
        for x in 0..spec.nx {
            let idx = y * spec.nx + x;
            if pop[idx].is_none() || lp[idx].is_none() {
                missing.push((x, y));
            }
        }
    }
    if !missing.is_empty() {
        let count = missing.len();
        missing.truncate(8);
        return Err(Error::GridCoverage(count, missing));
    }

    let cells = (0..spec.cell_count())
        .map(|idx| GridCell {
            cell_id: idx,
            x_index: idx % spec.nx,
            y_index: idx / spec.nx,
            population_density: pop[idx].unwrap(),
            land_price: lp[idx].unwrap(),
        })
        .collect();
    Ok(Grid { spec: *spec, cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_raster(nx: usize, ny: usize, value: f64) -> Vec<RasterRow> {
        (0..ny)
            .flat_map(|y| {
                (0..nx).map(move |x| RasterRow {
                    x_index: x,
                    y_index: y,
                    value,
                })
            })
            .collect()
    }

    #[test]
    fn twenty_km_box_has_400_cells() {
        let spec = GridSpec::from_dims(120.0, 30.0, 20, 20, 1.0).unwrap();
        assert_eq!(spec.cell_count(), 400);
        // Rebuilding from the derived bbox reproduces the cell counts.
        let spec2 = GridSpec::from_bbox(&spec.bbox(), 1.0).unwrap();
        assert_eq!((spec2.nx, spec2.ny), (20, 20));
    }

    #[test]
    fn min_corner_is_cell_zero() {
        let spec = GridSpec::from_dims(120.0, 30.0, 20, 20, 1.0).unwrap();
        assert_eq!(spec.cell_indices(120.0, 30.0).unwrap(), (0, 0));
    }

    #[test]
    fn interior_edge_goes_to_higher_cell() {
        let spec = GridSpec::from_dims(120.0, 30.0, 20, 20, 1.0).unwrap();
        // A point exactly 3 km east of the origin sits on the 2|3 cell edge.
        let (lon, lat) = spec.lonlat_at_km(3.0, 0.5);
        assert_eq!(spec.cell_indices(lon, lat).unwrap(), (3, 0));
    }

    #[test]
    fn interior_point_located() {
        let spec = GridSpec::from_dims(120.0, 30.0, 20, 20, 1.0).unwrap();
        let (lon, lat) = spec.lonlat_at_km(5.4, 7.9);
        assert_eq!(spec.cell_indices(lon, lat).unwrap(), (5, 7));
    }

    #[test]
    fn outside_point_errors() {
        let spec = GridSpec::from_dims(120.0, 30.0, 20, 20, 1.0).unwrap();
        assert!(spec.cell_indices(119.9, 30.0).is_err());
        let (lon, lat) = spec.lonlat_at_km(20.0, 5.0); // on the max edge: outside
        assert!(spec.cell_indices(lon, lat).is_err());
    }

    #[test]
    fn uniform_raster_fills_all_cells() {
        let spec = GridSpec::from_dims(120.0, 30.0, 4, 3, 1.0).unwrap();
        let grid = load_grid(
            &uniform_raster(4, 3, 1234.5),
            &uniform_raster(4, 3, 8.25),
            &spec,
        )
        .unwrap();
        assert_eq!(grid.cells().len(), 12);
        assert!(grid
            .cells()
            .iter()
            .all(|c| c.population_density == 1234.5 && c.land_price == 8.25));
        assert!(grid
            .cells()
            .iter()
            .enumerate()
            .all(|(i, c)| c.cell_id == i && c.cell_id == c.y_index * 4 + c.x_index));
    }

    #[test]
    fn coverage_hole_lists_missing_cells() {
        let spec = GridSpec::from_dims(120.0, 30.0, 2, 2, 1.0).unwrap();
        let mut pop = uniform_raster(2, 2, 1.0);
        pop.pop();
        let err = load_grid(&pop, &uniform_raster(2, 2, 1.0), &spec).unwrap_err();
        match err {
            Error::GridCoverage(count, cells) => {
                assert_eq!(count, 1);
                assert_eq!(cells, vec![(1, 1)]);
            }
            other => panic!("expected coverage error, got {other}"),
        }
    }

    #[test]
    fn raster_round_trip() {
        let text = "x_index,y_index,value\n0,0,5.5\n1,0,6\n0,1,7.25\n1,1,8\n";
        let rows = parse_raster(text.as_bytes()).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[2].value, 7.25);
    }
}

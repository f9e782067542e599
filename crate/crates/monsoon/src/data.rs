//! Gridded annual rainfall observations.
//!
//! A dataset is the complete field `y[s][t]` of mean rainfall (mm/day) over
//! `S` locations and `T` consecutive years, together with the per-year
//! spatial mean (the aggregate series the all-India analysis runs on).
//! Missing cells are an error; nothing is imputed.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::GridIndex;
use crate::state::write_atomic;

/// Complete observed field over a grid and a run of consecutive years.
#[derive(Debug, Clone)]
pub struct RainfallDataset {
    grid: GridIndex,
    years: Vec<i32>,
    /// Row-major S x T, mm/day.
    y: Vec<f64>,
    /// Per-year spatial mean, length T.
    aimr: Vec<f64>,
}

impl RainfallDataset {
    /// Assemble a dataset from a grid and a dense `S x T` value matrix.
    pub fn new(grid: GridIndex, years: Vec<i32>, y: Vec<f64>) -> Result<Self> {
        let s = grid.len();
        let t = years.len();
        if y.len() != s * t {
            return Err(Error::ShapeMismatch(format!(
                "value matrix has {} cells, expected {}x{}",
                y.len(),
                s,
                t
            )));
        }
        for window in years.windows(2) {
            if window[1] != window[0] + 1 {
                return Err(Error::IncompleteGrid(format!(
                    "years must be consecutive, found {} then {}",
                    window[0], window[1]
                )));
            }
        }
        for (i, &v) in y.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidValue {
                    line: 0,
                    msg: format!("rainfall must be finite and non-negative, got {v} at cell {i}"),
                });
            }
        }
        let aimr = compute_aimr(s, t, &y);
        Ok(RainfallDataset {
            grid,
            years,
            y,
            aimr,
        })
    }

    pub fn grid(&self) -> &GridIndex {
        &self.grid
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn n_locations(&self) -> usize {
        self.grid.len()
    }

    pub fn n_years(&self) -> usize {
        self.years.len()
    }

    /// Observed mean rainfall at location `s` in year index `t` (mm/day).
    pub fn value(&self, s: usize, t: usize) -> f64 {
        self.y[s * self.years.len() + t]
    }

    /// Full series of location `s` across years.
    pub fn series(&self, s: usize) -> &[f64] {
        let t = self.years.len();
        &self.y[s * t..(s + 1) * t]
    }

    /// Spatial-mean rainfall per year (the aggregate series).
    pub fn aimr(&self) -> &[f64] {
        &self.aimr
    }

    /// Write as CSV `location_id,lat,lon,year,rain_mm_per_day`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("location_id,lat,lon,year,rain_mm_per_day\n");
        for loc in self.grid.locations() {
            for (t, &year) in self.years.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    loc.id,
                    loc.lat,
                    loc.lon,
                    year,
                    self.value(loc.id, t)
                ));
            }
        }
        write_atomic(path, out.as_bytes())
    }
}

/// Load a dataset from CSV with header `location_id,lat,lon,year,rain_mm_per_day`.
///
/// The `location_id` column only joins rows of the same location; in-memory
/// ids are re-derived from the coordinates. Every location must cover every
/// year exactly once.
pub fn load_csv(path: impl AsRef<Path>) -> Result<RainfallDataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text)
}

pub(crate) fn parse_csv(text: &str) -> Result<RainfallDataset> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "location_id,lat,lon,year,rain_mm_per_day")) => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                msg: "expected header `location_id,lat,lon,year,rain_mm_per_day`".into(),
            })
        }
    }

    // Keyed by external location id: coordinates plus year -> value.
    struct Raw {
        lat: f64,
        lon: f64,
        by_year: BTreeMap<i32, f64>,
    }
    let mut raw: BTreeMap<u64, Raw> = BTreeMap::new();
    let mut all_years: BTreeMap<i32, ()> = BTreeMap::new();

    for (i, line_text) in lines {
        let line = i + 1;
        if line_text.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line_text.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 5 fields, got {}", fields.len()),
            });
        }
        let id: u64 = fields[0].trim().parse().map_err(|_| Error::Parse {
            line,
            msg: format!("bad location id `{}`", fields[0]),
        })?;
        let lat: f64 = fields[1].trim().parse().map_err(|_| Error::Parse {
            line,
            msg: format!("bad latitude `{}`", fields[1]),
        })?;
        let lon: f64 = fields[2].trim().parse().map_err(|_| Error::Parse {
            line,
            msg: format!("bad longitude `{}`", fields[2]),
        })?;
        let year: i32 = fields[3].trim().parse().map_err(|_| Error::Parse {
            line,
            msg: format!("bad year `{}`", fields[3]),
        })?;
        let value: f64 = fields[4].trim().parse().map_err(|_| Error::Parse {
            line,
            msg: format!("bad rainfall value `{}`", fields[4]),
        })?;
        if !value.is_finite() || value < 0.0 {
            return Err(Error::InvalidValue {
                line,
                msg: format!("rainfall must be finite and non-negative, got {value}"),
            });
        }
        let entry = raw.entry(id).or_insert_with(|| Raw {
            lat,
            lon,
            by_year: BTreeMap::new(),
        });
        if entry.lat != lat || entry.lon != lon {
            return Err(Error::Parse {
                line,
                msg: format!("location {id} has inconsistent coordinates"),
            });
        }
        if entry.by_year.insert(year, value).is_some() {
            return Err(Error::Parse {
                line,
                msg: format!("duplicate cell for location {id}, year {year}"),
            });
        }
        all_years.entry(year).or_insert(());
    }

    if raw.is_empty() {
        return Err(Error::IncompleteGrid("file contains no data rows".into()));
    }
    let years: Vec<i32> = all_years.keys().copied().collect();
    for (id, r) in &raw {
        for &year in &years {
            if !r.by_year.contains_key(&year) {
                return Err(Error::IncompleteGrid(format!(
                    "location {id} has no value for year {year}"
                )));
            }
        }
    }

    let coords: Vec<(f64, f64)> = raw.values().map(|r| (r.lat, r.lon)).collect();
    let grid = GridIndex::build(&coords)?;
    let t = years.len();
    let mut y = vec![0.0; grid.len() * t];
    for r in raw.values() {
        let s = grid.id_at(r.lat, r.lon).ok_or_else(|| {
            Error::IncompleteGrid(format!("lost location ({}, {})", r.lat, r.lon))
        })?;
        for (ti, &year) in years.iter().enumerate() {
            y[s * t + ti] = r.by_year[&year];
        }
    }
    RainfallDataset::new(grid, years, y)
}

/// Daily series for a set of locations, ready for annual aggregation.
#[derive(Debug, Clone)]
pub struct DailySeries {
    pub coords: Vec<(f64, f64)>,
    /// One value per day per location, all locations the same length.
    pub values: Vec<Vec<f64>>,
}

/// Year boundaries for aggregation: `(year label, days in that year)`.
#[derive(Debug, Clone)]
pub struct Calendar {
    pub years: Vec<(i32, usize)>,
}

impl Calendar {
    pub fn total_days(&self) -> usize {
        self.years.iter().map(|&(_, d)| d).sum()
    }
}

/// Aggregate daily rainfall to annual means (mm/day per year).
pub fn aggregate_annual(daily: &DailySeries, calendar: &Calendar) -> Result<RainfallDataset> {
    let expected = calendar.total_days();
    for (i, series) in daily.values.iter().enumerate() {
        if series.len() != expected {
            return Err(Error::IncompleteSeries(format!(
                "location {} has {} days, calendar requires {}",
                i,
                series.len(),
                expected
            )));
        }
    }
    if daily.coords.len() != daily.values.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} coordinates but {} series",
            daily.coords.len(),
            daily.values.len()
        )));
    }
    let grid = GridIndex::build(&daily.coords)?;
    let years: Vec<i32> = calendar.years.iter().map(|&(y, _)| y).collect();
    let t = years.len();
    let mut y = vec![0.0; grid.len() * t];
    for (i, &(lat, lon)) in daily.coords.iter().enumerate() {
        let s = grid
            .id_at(lat, lon)
            .expect("coordinate present by construction");
        let mut offset = 0;
        for (ti, &(_, days)) in calendar.years.iter().enumerate() {
            let chunk = &daily.values[i][offset..offset + days];
            y[s * t + ti] = chunk.iter().sum::<f64>() / days as f64;
            offset += days;
        }
    }
    RainfallDataset::new(grid, years, y)
}

/// Per-year spatial mean over all locations.
pub fn compute_aimr(n_locations: usize, n_years: usize, y: &[f64]) -> Vec<f64> {
    let mut aimr = vec![0.0; n_years];
    for s in 0..n_locations {
        for (t, a) in aimr.iter_mut().enumerate() {
            *a += y[s * n_years + t];
        }
    }
    for a in &mut aimr {
        *a /= n_locations as f64;
    }
    aimr
}

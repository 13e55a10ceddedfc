//! Crash records, severity weighting and construction of the EPDO target.

use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{GridSpec, SpaceTimeCube};
use crate::{Error, Result};

/// KABCO injury severity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Severity {
    K,
    A,
    B,
    C,
    O,
}

impl FromStr for Severity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "K" => Ok(Severity::K),
            "A" => Ok(Severity::A),
            "B" => Ok(Severity::B),
            "C" => Ok(Severity::C),
            "O" => Ok(Severity::O),
            other => Err(format!("unknown severity code {other:?}")),
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Severity::K => "K",
            Severity::A => "A",
            Severity::B => "B",
            Severity::C => "C",
            Severity::O => "O",
        };
        f.write_str(s)
    }
}

/// Equivalent-property-damage-only weight per severity class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeverityWeights {
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "O")]
    pub o: f64,
}

impl SeverityWeights {
    /// Validated weights: ordered K ≥ A ≥ B ≥ C ≥ O with O = 1.
    pub fn new(k: f64, a: f64, b: f64, c: f64, o: f64) -> Result<Self> {
        let w = Self { k, a, b, c, o };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.k, self.a, self.b, self.c, self.o];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid("severity weights must be positive and finite"));
        }
        if self.o != 1.0 {
            return Err(Error::invalid(format!(
                "weight of O must be 1, got {}",
                self.o
            )));
        }
        if !(self.k >= self.a && self.a >= self.b && self.b >= self.c && self.c >= self.o) {
            return Err(Error::invalid(
                "severity weights must satisfy K >= A >= B >= C >= O",
            ));
        }
        Ok(())
    }

    /// Multiplies every weight by `alpha`. The result is no longer
    /// normalised to O = 1; it exists for sensitivity analysis.
    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            k: self.k * alpha,
            a: self.a * alpha,
            b: self.b * alpha,
            c: self.c * alpha,
            o: self.o * alpha,
        }
    }

    pub fn weight(&self, severity: Severity) -> f64 {
        match severity {
            Severity::K => self.k,
            Severity::A => self.a,
            Severity::B => self.b,
            Severity::C => self.c,
            Severity::O => self.o,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CrashRecord {
    pub week_index: usize,
    pub cell_x: usize,
    pub cell_y: usize,
    pub severity: Severity,
    pub inclement_weather: bool,
}

/// Aggregates weather-related crashes into road-length-normalised EPDO.
///
/// Records with `inclement_weather = false` are ignored. Every record is
/// range-checked, including ignored ones.
pub fn build_cube(
    records: &[CrashRecord],
    grid: &GridSpec,
    weights: &SeverityWeights,
    weeks: usize,
) -> Result<SpaceTimeCube> {
    if weeks == 0 {
        return Err(Error::invalid("week count must be at least 1"));
    }
    let n = grid.n_cells();
    let mut sums = vec![0.0; n * weeks];
    for (index, r) in records.iter().enumerate() {
        if r.cell_x >= grid.width() || r.cell_y >= grid.height() {
            return Err(Error::Record {
                index,
                reason: format!(
                    "cell ({}, {}) outside {}x{} grid",
                    r.cell_x,
                    r.cell_y,
                    grid.width(),
                    grid.height()
                ),
            });
        }
        if r.week_index >= weeks {
            return Err(Error::Record {
                index,
                reason: format!("week {} outside [0, {weeks})", r.week_index),
            });
        }
        if !r.inclement_weather {
            continue;
        }
        let cell = grid.index(r.cell_x, r.cell_y);
        sums[cell * weeks + r.week_index] += weights.weight(r.severity);
    }
    for (c, len) in grid.road_length_miles().iter().enumerate() {
        let row = &mut sums[c * weeks..(c + 1) * weeks];
        if *len > 0.0 {
            row.iter_mut().for_each(|v| *v /= len);
        }
    }
    SpaceTimeCube::new(grid.clone(), weeks, sums)
}

fn parse_err(path: &Path, line: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        reason: reason.into(),
    }
}

fn column_index(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| parse_err(path, 1, format!("missing column {name}")))
}

fn parse_field<T: FromStr>(
    row: &csv::StringRecord,
    col: usize,
    name: &str,
    path: &Path,
    line: usize,
) -> Result<T> {
    let raw = row
        .get(col)
        .ok_or_else(|| parse_err(path, line, format!("missing field {name}")))?;
    raw.trim()
        .parse()
        .map_err(|_| parse_err(path, line, format!("invalid {name} {raw:?}")))
}

fn parse_bool(raw: &str) -> Option<bool> {
    match raw.trim() {
        "true" => Some(true),
        "false" => Some(false),
        _ => None,
    }
}

/// Parses crash rows from any reader. `path` only labels error messages.
pub fn parse_crash_csv<R: Read>(reader: R, path: &Path) -> Result<Vec<CrashRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?
        .clone();
    let week_col = column_index(&headers, "week_index", path)?;
    let x_col = column_index(&headers, "cell_x", path)?;
    let y_col = column_index(&headers, "cell_y", path)?;
    let sev_col = column_index(&headers, "severity", path)?;
    let wx_col = column_index(&headers, "inclement_weather", path)?;

    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            parse_err(path, line, e.to_string())
        })?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let severity_raw = row.get(sev_col).unwrap_or("");
        let severity = severity_raw
            .parse::<Severity>()
            .map_err(|msg| parse_err(path, line, msg))?;
        let wx_raw = row.get(wx_col).unwrap_or("");
        let inclement_weather = parse_bool(wx_raw).ok_or_else(|| {
            parse_err(path, line, format!("invalid inclement_weather {wx_raw:?}"))
        })?;
        out.push(CrashRecord {
            week_index: parse_field(&row, week_col, "week_index", path, line)?,
            cell_x: parse_field(&row, x_col, "cell_x", path, line)?,
            cell_y: parse_field(&row, y_col, "cell_y", path, line)?,
            severity,
            inclement_weather,
        });
    }
    Ok(out)
}

/// Reads a crash CSV with header `week_index,cell_x,cell_y,severity,inclement_weather`.
pub fn load_crash_csv(path: &Path) -> Result<Vec<CrashRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_crash_csv(file, path)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub cell_x: usize,
    pub cell_y: usize,
    pub feature_name: String,
    pub value: f64,
}

/// Reads a static feature CSV with header `cell_x,cell_y,feature_name,value`.
pub fn load_features_csv(path: &Path) -> Result<Vec<FeatureRow>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = rdr
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?
        .clone();
    let x_col = column_index(&headers, "cell_x", path)?;
    let y_col = column_index(&headers, "cell_y", path)?;
    let name_col = column_index(&headers, "feature_name", path)?;
    let value_col = column_index(&headers, "value", path)?;
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            parse_err(path, line, e.to_string())
        })?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let value: f64 = parse_field(&row, value_col, "value", path, line)?;
        if !value.is_finite() {
            return Err(parse_err(path, line, "feature value must be finite"));
        }
        out.push(FeatureRow {
            cell_x: parse_field(&row, x_col, "cell_x", path, line)?,
            cell_y: parse_field(&row, y_col, "cell_y", path, line)?,
            feature_name: row.get(name_col).unwrap_or("").to_string(),
            value,
        });
    }
    Ok(out)
}

//! Gridded forecasts over a block of consecutive weeks, and their CSV form.
//!
//! CSV columns are `cell_x,cell_y,week_index,prediction`. Only road cells
//! are written; a missing row reads back as null.

use std::io::Write;
use std::ops::Range;
use std::path::Path;

use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct ForecastGrid {
    width: usize,
    height: usize,
    weeks: Range<usize>,
    /// Cell-major, `NaN` for null.
    values: Vec<f64>,
}

impl PartialEq for ForecastGrid {
    fn eq(&self, other: &Self) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.weeks == other.weeks
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()))
    }
}

impl ForecastGrid {
    pub fn empty(width: usize, height: usize, weeks: Range<usize>) -> Self {
        Self {
            width,
            height,
            values: vec![f64::NAN; width * height * weeks.len()],
            weeks,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_cells(&self) -> usize {
        self.width * self.height
    }

    pub fn weeks(&self) -> Range<usize> {
        self.weeks.clone()
    }

    fn slot(&self, cell: usize, week: usize) -> usize {
        debug_assert!(self.weeks.contains(&week));
        cell * self.weeks.len() + (week - self.weeks.start)
    }

    /// Prediction for `cell` at absolute `week`, `NaN` when null.
    pub fn get(&self, cell: usize, week: usize) -> f64 {
        self.values[self.slot(cell, week)]
    }

    pub fn set(&mut self, cell: usize, week: usize, value: f64) {
        let i = self.slot(cell, week);
        self.values[i] = value;
    }

    /// All cells for one absolute week, row-major.
    pub fn frame(&self, week: usize) -> Vec<f64> {
        (0..self.n_cells()).map(|c| self.get(c, week)).collect()
    }

    pub fn set_frame(&mut self, week: usize, frame: &[f64]) {
        for (c, v) in frame.iter().enumerate() {
            self.set(c, week, *v);
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("cell_x,cell_y,week_index,prediction\n");
        for week in self.weeks.clone() {
            for cell in 0..self.n_cells() {
                let v = self.get(cell, week);
                if v.is_nan() {
                    continue;
                }
                let (x, y) = (cell % self.width, cell / self.width);
                out.push_str(&format!("{x},{y},{week},{v}\n"));
            }
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }

    /// Reads a forecast for a `width`×`height` grid covering `weeks`.
    pub fn read_csv(path: &Path, width: usize, height: usize, weeks: Range<usize>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                reason: e.to_string(),
            })?;
        let mut grid = Self::empty(width, height, weeks.clone());
        for row in rdr.records() {
            let row = row.map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: e.position().map(|p| p.line() as usize).unwrap_or(0),
                reason: e.to_string(),
            })?;
            let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
            let bad = |reason: String| Error::Parse {
                path: path.to_path_buf(),
                line,
                reason,
            };
            if row.len() != 4 {
                return Err(bad(format!("expected 4 fields, got {}", row.len())));
            }
            let x: usize = row[0].parse().map_err(|_| bad(format!("invalid cell_x {:?}", &row[0])))?;
            let y: usize = row[1].parse().map_err(|_| bad(format!("invalid cell_y {:?}", &row[1])))?;
            let t: usize = row[2].parse().map_err(|_| bad(format!("invalid week_index {:?}", &row[2])))?;
            let v: f64 = row[3].parse().map_err(|_| bad(format!("invalid prediction {:?}", &row[3])))?;
            if x >= width || y >= height || !weeks.contains(&t) {
                return Err(bad(format!("cell ({x}, {y}) week {t} outside the forecast range")));
            }
            grid.set(y * width + x, t, v);
        }
        Ok(grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_roundtrip_preserves_values_and_nulls() {
        let dir = tempfile::tempdir().unwrap();
        let mut g = ForecastGrid::empty(3, 2, 10..13);
        for c in 0..6 {
            for t in 10..13 {
                if c != 4 {
                    g.set(c, t, (c as f64 * 0.1 + t as f64).sqrt() / 3.0);
                }
            }
        }
        let path = dir.path().join("f.csv");
        g.write_csv(&path).unwrap();
        let back = ForecastGrid::read_csv(&path, 3, 2, 10..13).unwrap();
        assert_eq!(g, back);
        assert!(back.get(4, 11).is_nan());
    }

    #[test]
    fn out_of_range_row_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        std::fs::write(&path, "cell_x,cell_y,week_index,prediction\n0,0,9,1.0\n").unwrap();
        assert!(ForecastGrid::read_csv(&path, 2, 2, 10..12).is_err());
    }
}

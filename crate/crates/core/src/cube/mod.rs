//! Grid geometry and the space-time cube of weekly EPDO values.
//!
//! A cube stores the target matrix cell-major (`n` cells × `T` weeks). Cells
//! without roads carry a null marker (`NaN` in storage, `None` through the
//! accessors); they never participate in losses, metrics or point patterns.

mod archive;
mod records;
mod split;
mod synth;

pub use archive::{load_cube, load_cube_with_manifest, save_cube, CubeManifest, CUBE_FORMAT_VERSION};
pub use records::{
    build_cube, load_crash_csv, load_features_csv, parse_crash_csv, CrashRecord, FeatureRow,
    Severity, SeverityWeights,
};
pub use split::{chronological_split, SplitIndex};
pub use synth::{synth_cube, RegimeSpec};

use crate::{Error, Result};

/// Rectangular grid of square cells with per-cell road length.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    width: usize,
    height: usize,
    cell_size_miles: f64,
    road_length_miles: Vec<f64>,
}

impl GridSpec {
    pub fn new(
        width: usize,
        height: usize,
        cell_size_miles: f64,
        road_length_miles: Vec<f64>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("grid width and height must be at least 1"));
        }
        if !(cell_size_miles > 0.0 && cell_size_miles.is_finite()) {
            return Err(Error::invalid(format!(
                "cell size must be positive, got {cell_size_miles}"
            )));
        }
        if road_length_miles.len() != width * height {
            return Err(Error::shape(format!(
                "road length has {} entries, grid has {} cells",
                road_length_miles.len(),
                width * height
            )));
        }
        if let Some(c) = road_length_miles
            .iter()
            .position(|l| !(l.is_finite() && *l >= 0.0))
        {
            return Err(Error::invalid(format!(
                "road length of cell {c} must be a nonnegative finite number"
            )));
        }
        Ok(Self {
            width,
            height,
            cell_size_miles,
            road_length_miles,
        })
    }

    /// Grid where every cell carries the same road length.
    pub fn uniform(width: usize, height: usize, cell_size_miles: f64, road_length: f64) -> Result<Self> {
        Self::new(
            width,
            height,
            cell_size_miles,
            vec![road_length; width * height],
        )
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

    pub fn cell_size_miles(&self) -> f64 {
        self.cell_size_miles
    }

    /// Total extent of the grid in square miles.
    pub fn area_sq_miles(&self) -> f64 {
        self.n_cells() as f64 * self.cell_size_miles * self.cell_size_miles
    }

    pub fn road_length_miles(&self) -> &[f64] {
        &self.road_length_miles
    }

    pub fn is_road(&self, cell: usize) -> bool {
        self.road_length_miles[cell] > 0.0
    }

    pub fn road_mask(&self) -> Vec<bool> {
        self.road_length_miles.iter().map(|l| *l > 0.0).collect()
    }

    pub fn road_cells(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_cells()).filter(move |c| self.is_road(*c))
    }

    pub fn n_road_cells(&self) -> usize {
        self.road_cells().count()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y * self.width + x
    }

    #[inline]
    pub fn coords(&self, cell: usize) -> (usize, usize) {
        (cell % self.width, cell / self.width)
    }

    /// Cell centroid in miles, origin at the upper-left grid corner.
    pub fn centroid_miles(&self, cell: usize) -> (f64, f64) {
        let (x, y) = self.coords(cell);
        (
            (x as f64 + 0.5) * self.cell_size_miles,
            (y as f64 + 0.5) * self.cell_size_miles,
        )
    }
}

/// A named static per-cell feature, broadcast over every week.
#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub name: String,
    pub values: Vec<f64>,
}

/// Target EPDO matrix plus the static feature stack for one grid.
#[derive(Debug, Clone)]
pub struct SpaceTimeCube {
    grid: GridSpec,
    weeks: usize,
    target: Vec<f64>,
    features: Vec<Feature>,
    week_labels: Option<Vec<String>>,
}

impl PartialEq for SpaceTimeCube {
    fn eq(&self, other: &Self) -> bool {
        // NaN null markers compare equal when they sit in the same place.
        self.grid == other.grid
            && self.weeks == other.weeks
            && self.features == other.features
            && self.week_labels == other.week_labels
            && self.target.len() == other.target.len()
            && self
                .target
                .iter()
                .zip(&other.target)
                .all(|(a, b)| a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()))
    }
}

impl SpaceTimeCube {
    /// Builds a cube from a cell-major target matrix. Entries of roadless cells
    /// are replaced with the null marker; road cells must be finite and
    /// nonnegative.
    pub fn new(grid: GridSpec, weeks: usize, mut target: Vec<f64>) -> Result<Self> {
        if weeks == 0 {
            return Err(Error::invalid("a cube needs at least one week"));
        }
        let n = grid.n_cells();
        if target.len() != n * weeks {
            return Err(Error::shape(format!(
                "target has {} entries, expected {} cells x {} weeks",
                target.len(),
                n,
                weeks
            )));
        }
        for c in 0..n {
            let row = &mut target[c * weeks..(c + 1) * weeks];
            if grid.is_road(c) {
                if let Some(t) = row.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
                    let (x, y) = grid.coords(c);
                    return Err(Error::invalid(format!(
                        "road cell ({x}, {y}) week {t} has invalid EPDO {}",
                        row[t]
                    )));
                }
            } else {
                row.fill(f64::NAN);
            }
        }
        Ok(Self {
            grid,
            weeks,
            target,
            features: Vec::new(),
            week_labels: None,
        })
    }

    pub fn with_feature(mut self, name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if values.len() != self.grid.n_cells() {
            return Err(Error::shape(format!(
                "feature {name} has {} entries, grid has {} cells",
                values.len(),
                self.grid.n_cells()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("feature {name}")));
        }
        if self.features.iter().any(|f| f.name == name) {
            return Err(Error::invalid(format!("duplicate feature {name}")));
        }
        self.features.push(Feature { name, values });
        Ok(self)
    }

    pub fn with_week_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.weeks {
            return Err(Error::shape(format!(
                "{} week labels for {} weeks",
                labels.len(),
                self.weeks
            )));
        }
        self.week_labels = Some(labels);
        Ok(self)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn weeks(&self) -> usize {
        self.weeks
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn week_labels(&self) -> Option<&[String]> {
        self.week_labels.as_deref()
    }

    /// Raw cell-major storage, `NaN` for null cells.
    pub fn target_raw(&self) -> &[f64] {
        &self.target
    }

    /// Weekly series of one cell (all `NaN` for a roadless cell).
    pub fn series(&self, cell: usize) -> &[f64] {
        &self.target[cell * self.weeks..(cell + 1) * self.weeks]
    }

    pub fn value(&self, cell: usize, week: usize) -> Option<f64> {
        if self.grid.is_road(cell) {
            Some(self.target[cell * self.weeks + week])
        } else {
            None
        }
    }

    /// Value with nulls read as `NaN`.
    #[inline]
    pub fn raw(&self, cell: usize, week: usize) -> f64 {
        self.target[cell * self.weeks + week]
    }

    /// Spatial slice of one week, row-major over the grid.
    pub fn frame(&self, week: usize) -> Vec<f64> {
        (0..self.grid.n_cells()).map(|c| self.raw(c, week)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_degenerate_geometry() {
        assert!(GridSpec::uniform(0, 3, 5.0, 1.0).is_err());
        assert!(GridSpec::uniform(3, 3, 0.0, 1.0).is_err());
        assert!(GridSpec::new(2, 2, 5.0, vec![1.0; 3]).is_err());
        assert!(GridSpec::new(2, 1, 5.0, vec![1.0, -1.0]).is_err());
    }

    #[test]
    fn road_mask_follows_road_length() {
        let g = GridSpec::new(3, 1, 5.0, vec![0.0, 0.5, 2.0]).unwrap();
        assert_eq!(g.road_mask(), vec![false, true, true]);
        assert_eq!(g.n_road_cells(), 2);
        assert_eq!(g.coords(g.index(2, 0)), (2, 0));
    }

    #[test]
    fn roadless_cells_become_null() {
        let g = GridSpec::new(2, 1, 5.0, vec![0.0, 1.0]).unwrap();
        let cube = SpaceTimeCube::new(g, 2, vec![3.0, 3.0, 1.0, 2.0]).unwrap();
        assert_eq!(cube.value(0, 0), None);
        assert!(cube.raw(0, 1).is_nan());
        assert_eq!(cube.value(1, 1), Some(2.0));
    }

    #[test]
    fn negative_road_value_is_rejected() {
        let g = GridSpec::uniform(1, 1, 5.0, 1.0).unwrap();
        assert!(SpaceTimeCube::new(g, 1, vec![-0.5]).is_err());
    }
}

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::cube::{GridSpec, SpaceTimeCube};
use crate::forecast::ForecastGrid;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// 0, 5, .., 50 miles.
pub fn default_radii() -> Vec<f64> {
    (0..=10).map(|i| 5.0 * i as f64).collect()
}

/// Centroids of the `q` road cells with the highest value in `frame`
/// (row-major over `grid`). Ties go to the smaller `(y, x)`.
pub fn hotspot_points(grid: &GridSpec, frame: &[f64], q: usize) -> Result<Vec<Point>> {
    if frame.len() != grid.n_cells() {
        return Err(Error::shape(format!(
            "frame has {} cells, grid has {}",
            frame.len(),
            grid.n_cells()
        )));
    }
    let mut cells: Vec<usize> = grid.road_cells().filter(|c| !frame[*c].is_nan()).collect();
    if q > cells.len() {
        return Err(Error::invalid(format!(
            "asked for {q} hotspots among {} valued road cells",
            cells.len()
        )));
    }
    // row-major index order is (y, x) order
    cells.sort_by(|a, b| frame[*b].total_cmp(&frame[*a]).then(a.cmp(b)));
    Ok(cells[..q]
        .iter()
        .map(|c| {
            let (x, y) = grid.centroid_miles(*c);
            Point::new(x, y)
        })
        .collect())
}

/// Cross-K estimate without edge correction:
/// `K(r) = area / (n_a n_b) * #{(p, q) : |p - q| <= r}`.
pub fn cross_k(a: &[Point], b: &[Point], area: f64, radii: &[f64]) -> Result<Vec<f64>> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("cross-K needs two nonempty point sets"));
    }
    if !(area > 0.0 && area.is_finite()) {
        return Err(Error::invalid(format!("area must be positive, got {area}")));
    }
    if radii.windows(2).any(|w| !(w[0] <= w[1])) || radii.iter().any(|r| !r.is_finite()) {
        return Err(Error::invalid("radii must be finite and ascending"));
    }
    let mut dists: Vec<f64> = a
        .iter()
        .flat_map(|p| b.iter().map(move |q| p.distance(q)))
        .collect();
    dists.sort_by(f64::total_cmp);
    let scale = area / (a.len() as f64 * b.len() as f64);
    Ok(radii
        .iter()
        .map(|r| scale * dists.partition_point(|d| d <= r) as f64)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossKCurve {
    pub radii: Vec<f64>,
    pub k: Vec<f64>,
    /// Test weeks that had at least one actual hotspot.
    pub weeks_used: usize,
}

impl CrossKCurve {
    /// Writes columns `r,K`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("r,K\n");
        for (r, k) in self.radii.iter().zip(&self.k) {
            out.push_str(&format!("{r},{k}\n"));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Averages predicted-vs-actual cross-K over the forecast's weeks.
///
/// Actual points are road cells with positive truth; predicted points are
/// the top-`q` forecast cells, `q` matching the actual count. The area is
/// the full grid extent.
pub fn crossk_evaluate(forecast: &ForecastGrid, truth: &SpaceTimeCube, radii: &[f64]) -> Result<CrossKCurve> {
    let grid = truth.grid();
    if (forecast.width(), forecast.height()) != (grid.width(), grid.height()) {
        return Err(Error::shape("forecast and truth grids differ"));
    }
    if forecast.weeks().end > truth.weeks() {
        return Err(Error::invalid("forecast extends past the truth cube"));
    }
    let area = grid.area_sq_miles();
    let mut sum = vec![0.0; radii.len()];
    let mut weeks_used = 0;
    for t in forecast.weeks() {
        let actual: Vec<Point> = grid
            .road_cells()
            .filter(|c| truth.raw(*c, t) > 0.0)
            .map(|c| {
                let (x, y) = grid.centroid_miles(c);
                Point::new(x, y)
            })
            .collect();
        if actual.is_empty() {
            continue;
        }
        let predicted = hotspot_points(grid, &forecast.frame(t), actual.len())?;
        let k = cross_k(&predicted, &actual, area, radii)?;
        for (s, v) in sum.iter_mut().zip(k) {
            *s += v;
        }
        weeks_used += 1;
    }
    if weeks_used == 0 {
        return Err(Error::invalid("no test week has any actual hotspot"));
    }
    Ok(CrossKCurve {
        radii: radii.to_vec(),
        k: sum.into_iter().map(|s| s / weeks_used as f64).collect(),
        weeks_used,
    })
}

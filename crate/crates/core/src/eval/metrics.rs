use std::path::Path;

use serde::{Deserialize, Serialize};

use super::crossk::CrossKCurve;
use super::dtw::ClusterLabels;
use crate::archive::{write_json, RunStamp};
use crate::cube::SpaceTimeCube;
use crate::forecast::ForecastGrid;
use crate::{Error, Result};

pub fn rmse(mse: f64) -> f64 {
    mse.sqrt()
}

/// Mean squared difference over pairs where both values are non-null.
pub fn mse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::shape(format!(
            "{} predictions for {} observations",
            pred.len(),
            truth.len()
        )));
    }
    ErrorStats::from_pairs(pred.iter().copied().zip(truth.iter().copied())).map(|s| s.mse)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub n: usize,
    pub mse: f64,
    pub rmse: f64,
}

impl ErrorStats {
    fn from_pairs(pairs: impl Iterator<Item = (f64, f64)>) -> Result<Self> {
        let (mut n, mut sum) = (0usize, 0.0);
        for (p, t) in pairs {
            if p.is_nan() || t.is_nan() {
                continue;
            }
            n += 1;
            sum += (p - t) * (p - t);
        }
        if n == 0 {
            return Err(Error::invalid("no valid (forecast, truth) pairs to score"));
        }
        let mse = sum / n as f64;
        Ok(Self {
            n,
            mse,
            rmse: rmse(mse),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterScore {
    pub label: usize,
    pub stats: ErrorStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelScore {
    pub model: String,
    pub all_regions: ErrorStats,
    /// Empty when no labels were supplied; clusters without valid pairs are
    /// omitted.
    pub clusters: Vec<ClusterScore>,
}

/// Scores `forecast` against the cube over the forecast's weeks.
///
/// Pairs with a null truth or null forecast are excluded.
pub fn score(
    model: &str,
    forecast: &ForecastGrid,
    truth: &SpaceTimeCube,
    labels: Option<&ClusterLabels>,
) -> Result<ModelScore> {
    let grid = truth.grid();
    if (forecast.width(), forecast.height()) != (grid.width(), grid.height()) {
        return Err(Error::shape(format!(
            "forecast is {}x{}, truth is {}x{}",
            forecast.width(),
            forecast.height(),
            grid.width(),
            grid.height()
        )));
    }
    let weeks = forecast.weeks();
    if weeks.end > truth.weeks() {
        return Err(Error::invalid(format!(
            "forecast reaches week {}, truth has {} weeks",
            weeks.end - 1,
            truth.weeks()
        )));
    }
    let pairs_for = |keep: &dyn Fn(usize) -> bool| {
        let weeks = weeks.clone();
        ErrorStats::from_pairs(grid.road_cells().filter(|c| keep(*c)).flat_map(move |c| {
            weeks.clone().map(move |t| (forecast.get(c, t), truth.raw(c, t)))
        }))
    };
    let all_regions = pairs_for(&|_| true)?;
    let mut clusters = Vec::new();
    if let Some(labels) = labels {
        labels.check_grid(grid.width(), grid.height())?;
        for label in 0..labels.k {
            match pairs_for(&|c| labels.labels[c] == Some(label)) {
                Ok(stats) => clusters.push(ClusterScore { label, stats }),
                Err(Error::InvalidArgument(_)) => {}
                Err(e) => return Err(e),
            }
        }
    }
    Ok(ModelScore {
        model: model.to_string(),
        all_regions,
        clusters,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub run: Option<RunStamp>,
    pub test_weeks: [usize; 2],
    pub models: Vec<ModelScore>,
    /// Per model, in the order of `models`.
    pub cross_k: Vec<(String, CrossKCurve)>,
}

impl EvalReport {
    pub fn model(&self, name: &str) -> Option<&ModelScore> {
        self.models.iter().find(|m| m.model == name)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cube::GridSpec;

    fn truth() -> SpaceTimeCube {
        let grid = GridSpec::new(3, 1, 1.0, vec![1.0, 1.0, 0.0]).unwrap();
        SpaceTimeCube::new(grid, 4, vec![1., 2., 3., 4., 0., 1., 0., 1., 9., 9., 9., 9.]).unwrap()
    }

    #[test]
    fn perfect_forecast_scores_zero() {
        let c = truth();
        let mut f = ForecastGrid::empty(3, 1, 2..4);
        for cell in 0..2 {
            for t in 2..4 {
                f.set(cell, t, c.raw(cell, t));
            }
        }
        let s = score("m", &f, &c, None).unwrap();
        assert_eq!(s.all_regions, ErrorStats { n: 4, mse: 0.0, rmse: 0.0 });
    }

    #[test]
    fn clusters_and_nulls() {
        let c = truth();
        let mut f = ForecastGrid::empty(3, 1, 2..4);
        f.set(0, 2, 5.0); // error 2
        f.set(0, 3, 4.0); // error 0
        f.set(1, 2, 1.0); // error 1
        f.set(2, 2, 100.0); // roadless, ignored
        let labels = ClusterLabels::new(3, 1, 2, vec![Some(1), Some(0), None]).unwrap();
        let s = score("m", &f, &c, Some(&labels)).unwrap();
        assert_eq!(s.all_regions.n, 3);
        assert!((s.all_regions.mse - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.clusters[0].label, 0);
        assert_eq!(s.clusters[0].stats.mse, 1.0);
        assert_eq!(s.clusters[1].stats.mse, 2.0);
        assert!((s.all_regions.rmse.powi(2) - s.all_regions.mse).abs() < 1e-9);
    }

    #[test]
    fn empty_forecast_is_an_error() {
        let f = ForecastGrid::empty(3, 1, 2..4);
        assert!(score("m", &f, &truth(), None).is_err());
        assert!(mse(&[1.0], &[1.0, 2.0]).is_err());
    }
}

//! Pooled ridge regression on lagged EPDO and static cell features.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cube::{SpaceTimeCube, SplitIndex};
use crate::forecast::ForecastGrid;
use crate::{Error, Result};

/// Ridge penalty; the intercept is not penalised.
pub const DEFAULT_RIDGE: f64 = 1e-6;

/// Coefficients are ordered `[lag 1 .. lag L, features.., intercept]`, lag 1
/// being the most recent week.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub lags: usize,
    pub feature_names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub ridge: f64,
    pub n_samples: usize,
}

impl LinearModel {
    pub fn n_coefficients(&self) -> usize {
        self.lags + self.feature_names.len() + 1
    }

    pub fn intercept(&self) -> f64 {
        self.coefficients[self.n_coefficients() - 1]
    }

    /// Regressor row for `cell` predicting `week` (needs `week >= lags`).
    pub fn design_row(&self, cube: &SpaceTimeCube, cell: usize, week: usize) -> Vec<f64> {
        design_row(cube, cell, week, self.lags)
    }

    /// Unclamped linear prediction for one regressor row.
    pub fn linear_prediction(&self, row: &[f64]) -> f64 {
        row.iter().zip(&self.coefficients).map(|(x, b)| x * b).sum()
    }

    /// Forecast from a cell's `history` (most recent last) and its static
    /// feature values, clamped at zero.
    pub fn predict(&self, history: &[f64], features: &[f64]) -> Result<f64> {
        if history.len() < self.lags {
            return Err(Error::invalid(format!(
                "need {} weeks of history, got {}",
                self.lags,
                history.len()
            )));
        }
        if features.len() != self.feature_names.len() {
            return Err(Error::shape(format!(
                "model has {} features, got {}",
                self.feature_names.len(),
                features.len()
            )));
        }
        let mut row: Vec<f64> = history.iter().rev().take(self.lags).copied().collect();
        row.extend_from_slice(features);
        row.push(1.0);
        Ok(self.linear_prediction(&row).max(0.0))
    }

    /// One-step-ahead forecasts for every road cell over `weeks`, each from
    /// the observed history before it. Roadless cells stay null.
    pub fn predict_grid(&self, cube: &SpaceTimeCube, weeks: Range<usize>) -> Result<ForecastGrid> {
        check_features(self, cube)?;
        if weeks.start < self.lags || weeks.end > cube.weeks() + 1 {
            return Err(Error::invalid(format!(
                "weeks {weeks:?} need {} lags inside a {}-week cube",
                self.lags,
                cube.weeks()
            )));
        }
        let grid = cube.grid();
        let mut out = ForecastGrid::empty(grid.width(), grid.height(), weeks.clone());
        for cell in grid.road_cells() {
            for t in weeks.clone() {
                let row = self.design_row(cube, cell, t);
                out.set(cell, t, self.linear_prediction(&row).max(0.0));
            }
        }
        Ok(out)
    }
}

fn check_features(model: &LinearModel, cube: &SpaceTimeCube) -> Result<()> {
    let names: Vec<&str> = cube.features().iter().map(|f| f.name.as_str()).collect();
    if names != model.feature_names.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(Error::invalid(format!(
            "model features {:?} do not match cube features {names:?}",
            model.feature_names
        )));
    }
    Ok(())
}

fn design_row(cube: &SpaceTimeCube, cell: usize, week: usize, lags: usize) -> Vec<f64> {
    let mut row: Vec<f64> = (1..=lags).map(|l| cube.raw(cell, week - l)).collect();
    row.extend(cube.features().iter().map(|f| f.values[cell]));
    row.push(1.0);
    row
}

/// Fits the ridge normal equations over every road cell and every training
/// week that has `lags` weeks of history.
pub fn fit_lr(cube: &SpaceTimeCube, split: &SplitIndex, lags: usize, ridge: f64) -> Result<LinearModel> {
    if lags == 0 {
        return Err(Error::invalid("linear regression needs at least one lag"));
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::invalid(format!("ridge must be nonnegative, got {ridge}")));
    }
    if split.weeks() != cube.weeks() {
        return Err(Error::shape(format!(
            "split covers {} weeks, cube has {}",
            split.weeks(),
            cube.weeks()
        )));
    }
    let p = lags + cube.features().len() + 1;
    let start = split.train.start.max(lags);
    let weeks = start..split.train.end.max(start);
    let cells: Vec<usize> = cube.grid().road_cells().collect();
    let n = cells.len() * weeks.len();
    if n < p {
        return Err(Error::invalid(format!(
            "{n} training samples for {p} coefficients"
        )));
    }

    let mut xtx = DMatrix::<f64>::zeros(p, p);
    let mut xty = DVector::<f64>::zeros(p);
    for &cell in &cells {
        for t in weeks.clone() {
            let row = DVector::from_vec(design_row(cube, cell, t, lags));
            xtx.ger(1.0, &row, &row, 1.0);
            xty.axpy(cube.raw(cell, t), &row, 1.0);
        }
    }
    for i in 0..p - 1 {
        xtx[(i, i)] += ridge;
    }
    let beta = match xtx.clone().cholesky() {
        Some(ch) => ch.solve(&xty),
        None => xtx
            .lu()
            .solve(&xty)
            .ok_or_else(|| Error::invalid("linear regression normal equations are singular"))?,
    };
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::NonFinite("linear regression coefficients".into()));
    }
    Ok(LinearModel {
        lags,
        feature_names: cube.features().iter().map(|f| f.name.clone()).collect(),
        coefficients: beta.iter().copied().collect(),
        ridge,
        n_samples: n,
    })
}

//! ARIMA(p, d, q) fitted per cell by conditional sum of squares.
//!
//! Residuals are computed recursively with zero presample residuals and the
//! first `p` differenced observations as conditioning values. The objective
//! is minimised by Nelder–Mead over `(φ, θ, c)`.

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::nelder_mead::{nelder_mead, NelderMeadOptions};
use crate::cube::{SpaceTimeCube, SplitIndex};
use crate::forecast::ForecastGrid;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

impl Default for ArimaOrder {
    fn default() -> Self {
        Self { p: 1, d: 0, q: 1 }
    }
}

impl ArimaOrder {
    pub fn new(p: usize, d: usize, q: usize) -> Self {
        Self { p, d, q }
    }

    /// Shortest series the order can be fitted to.
    pub fn min_length(&self) -> usize {
        self.p + self.d + self.q + 3
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaModel {
    pub order: ArimaOrder,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub intercept: f64,
    /// Mean squared conditional residual.
    pub sigma2: f64,
    /// Set when the fit fell back to a constant forecast of the differenced
    /// series.
    pub fallback: Option<String>,
    /// Series the model was fitted to; forecasts continue from its end.
    pub series: Vec<f64>,
}

fn difference(series: &[f64], d: usize) -> Vec<f64> {
    let mut w = series.to_vec();
    for _ in 0..d {
        w = w.windows(2).map(|p| p[1] - p[0]).collect();
    }
    w
}

/// Conditional residuals of the differenced series for `(φ, θ, c)`.
fn residuals(w: &[f64], ar: &[f64], ma: &[f64], c: f64) -> Vec<f64> {
    let p = ar.len();
    let mut e = vec![0.0; w.len()];
    for t in p..w.len() {
        let mut pred = c;
        for (i, phi) in ar.iter().enumerate() {
            pred += phi * w[t - 1 - i];
        }
        for (j, theta) in ma.iter().enumerate() {
            if t > j {
                pred += theta * e[t - 1 - j];
            }
        }
        e[t] = w[t] - pred;
    }
    e
}

fn css(w: &[f64], ar: &[f64], ma: &[f64], c: f64) -> f64 {
    let p = ar.len();
    let e = residuals(w, ar, ma, c);
    e[p..].iter().map(|v| v * v).sum::<f64>() / (w.len() - p) as f64
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn fit_arima(series: &[f64], order: ArimaOrder) -> Result<ArimaModel> {
    if series.len() < order.min_length() {
        return Err(Error::invalid(format!(
            "ARIMA({},{},{}) needs at least {} observations, got {}",
            order.p,
            order.d,
            order.q,
            order.min_length(),
            series.len()
        )));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ARIMA input series".into()));
    }
    let w = difference(series, order.d);
    let w_mean = mean(&w);
    let w_var = w.iter().map(|v| (v - w_mean).powi(2)).sum::<f64>() / w.len() as f64;
    let (p, q) = (order.p, order.q);

    let constant = |reason: Option<&str>| ArimaModel {
        order,
        ar: vec![0.0; p],
        ma: vec![0.0; q],
        intercept: w_mean,
        sigma2: w_var,
        fallback: reason.map(str::to_string),
        series: series.to_vec(),
    };
    if p == 0 && q == 0 {
        return Ok(constant(None));
    }
    if w_var <= 1e-12 * (w_mean * w_mean).max(1.0) {
        return Ok(constant(Some("constant differenced series")));
    }

    let objective = |x: &[f64]| css(&w, &x[..p], &x[p..p + q], x[p + q]);
    let mut x0 = vec![0.0; p + q];
    x0.push(w_mean);
    let mut steps = vec![0.1; p + q];
    steps.push(0.1 * w_var.sqrt());
    let opts = NelderMeadOptions::default();
    let mut best = nelder_mead(objective, &x0, &steps, opts);
    // one restart from the optimum shakes the simplex out of early collapse
    let restart = nelder_mead(objective, &best.x, &steps, opts);
    if restart.value <= best.value {
        best = restart;
    }
    if !best.value.is_finite() || best.x.iter().any(|v| !v.is_finite()) {
        return Ok(constant(Some("non-finite conditional sum of squares")));
    }
    Ok(ArimaModel {
        order,
        ar: best.x[..p].to_vec(),
        ma: best.x[p..p + q].to_vec(),
        intercept: best.x[p + q],
        sigma2: best.value,
        fallback: None,
        series: series.to_vec(),
    })
}

/// Multi-step forecast continuing the fitted series.
pub fn forecast_arima(model: &ArimaModel, steps: usize) -> Vec<f64> {
    forecast_from(model, &model.series, steps)
}

/// One-step-ahead forecast after `history` using the model's coefficients.
pub fn one_step_arima(model: &ArimaModel, history: &[f64]) -> Result<f64> {
    if history.len() < model.order.d + model.order.p.max(1) {
        return Err(Error::invalid(format!(
            "history of {} weeks is too short for ARIMA({},{},{})",
            history.len(),
            model.order.p,
            model.order.d,
            model.order.q
        )));
    }
    Ok(forecast_from(model, history, 1)[0])
}

fn forecast_from(model: &ArimaModel, series: &[f64], steps: usize) -> Vec<f64> {
    let d = model.order.d;
    // levels[k] is the k-times differenced series
    let mut levels = vec![series.to_vec()];
    for k in 0..d {
        levels.push(difference(&levels[k], 1));
    }
    let mut w = levels[d].clone();
    let mut e = residuals(&w, &model.ar, &model.ma, model.intercept);
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let t = w.len();
        let mut next = model.intercept;
        for (i, phi) in model.ar.iter().enumerate() {
            if t > i {
                next += phi * w[t - 1 - i];
            }
        }
        for (j, theta) in model.ma.iter().enumerate() {
            if t > j {
                next += theta * e[t - 1 - j];
            }
        }
        w.push(next);
        e.push(0.0);
        // integrate back up through the differencing levels
        let mut value = next;
        for k in (0..d).rev() {
            value += *levels[k].last().expect("levels are nonempty");
            levels[k].push(value);
        }
        out.push(value);
    }
    out
}

/// Independent per-cell ARIMA models over one grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaGrid {
    pub order: ArimaOrder,
    pub width: usize,
    pub height: usize,
    /// Row-major, `None` for roadless cells.
    pub models: Vec<Option<ArimaModel>>,
}

impl ArimaGrid {
    /// Fits every road cell on its training weeks, in parallel.
    pub fn fit(cube: &SpaceTimeCube, split: &SplitIndex, order: ArimaOrder) -> Result<Self> {
        let grid = cube.grid();
        let train = split.train.clone();
        let models = (0..grid.n_cells())
            .into_par_iter()
            .map(|cell| {
                if !grid.is_road(cell) {
                    return Ok(None);
                }
                fit_arima(&cube.series(cell)[train.clone()], order).map(Some)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            order,
            width: grid.width(),
            height: grid.height(),
            models,
        })
    }

    pub fn n_fallbacks(&self) -> usize {
        self.models
            .iter()
            .flatten()
            .filter(|m| m.fallback.is_some())
            .count()
    }

    /// One-step-ahead forecasts over `weeks`, each conditioned on the
    /// observed history before it, clamped at zero.
    pub fn predict_grid(&self, cube: &SpaceTimeCube, weeks: Range<usize>) -> Result<ForecastGrid> {
        let grid = cube.grid();
        if (grid.width(), grid.height()) != (self.width, self.height) {
            return Err(Error::shape(format!(
                "models cover a {}x{} grid, cube is {}x{}",
                self.width,
                self.height,
                grid.width(),
                grid.height()
            )));
        }
        if weeks.end > cube.weeks() + 1 {
            return Err(Error::invalid(format!(
                "cannot forecast week {} from a {}-week cube",
                weeks.end - 1,
                cube.weeks()
            )));
        }
        let rows = self
            .models
            .par_iter()
            .enumerate()
            .map(|(cell, m)| match m {
                None => Ok(vec![f64::NAN; weeks.len()]),
                Some(m) => weeks
                    .clone()
                    .map(|t| one_step_arima(m, &cube.series(cell)[..t]).map(|v| v.max(0.0)))
                    .collect(),
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = ForecastGrid::empty(self.width, self.height, weeks.clone());
        for (cell, row) in rows.iter().enumerate() {
            for (k, t) in weeks.clone().enumerate() {
                out.set(cell, t, row[k]);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn constant_series_forecasts_constant() {
        for (p, d, q) in [(0, 0, 0), (1, 0, 1), (2, 1, 1), (0, 2, 0)] {
            let m = fit_arima(&[4.25; 30], ArimaOrder::new(p, d, q)).unwrap();
            for v in forecast_arima(&m, 5) {
                assert!((v - 4.25).abs() < 1e-12, "({p},{d},{q}) -> {v}");
            }
        }
    }

    #[test]
    fn random_walk_order_continues_linear_trend() {
        let s: Vec<f64> = (0..20).map(|t| 1.0 + 0.5 * t as f64).collect();
        let m = fit_arima(&s, ArimaOrder::new(0, 1, 0)).unwrap();
        let f = forecast_arima(&m, 4);
        for (h, v) in f.iter().enumerate() {
            let expected = 1.0 + 0.5 * (20 + h) as f64;
            assert!((v - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn white_noise_order_forecasts_mean() {
        let s = [1.0, 4.0, 2.0, 7.0, 3.0, 1.0];
        let m = fit_arima(&s, ArimaOrder::new(0, 0, 0)).unwrap();
        assert_eq!(forecast_arima(&m, 3), vec![3.0; 3]);
    }

    #[test]
    fn recovers_ar1_coefficient() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let mut x = vec![0.0];
        for _ in 1..500 {
            let prev = *x.last().unwrap();
            x.push(0.8 * prev + noise.sample(&mut rng));
        }
        let m = fit_arima(&x, ArimaOrder::new(1, 0, 0)).unwrap();
        assert!((m.ar[0] - 0.8).abs() < 0.1, "{m:?}");
        assert!(m.fallback.is_none());
        assert!((m.sigma2 - 0.01).abs() < 0.003);
    }

    #[test]
    fn arma_fit_beats_mean_forecast() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut x = vec![0.0];
        let mut e_prev = 0.0;
        for _ in 1..400 {
            let e = noise.sample(&mut rng);
            let prev = *x.last().unwrap();
            x.push(2.0 + 0.6 * prev + 0.3 * e_prev + e);
            e_prev = e;
        }
        let m = fit_arima(&x, ArimaOrder::default()).unwrap();
        assert!((m.ar[0] - 0.6).abs() < 0.15, "{m:?}");
        assert!((m.ma[0] - 0.3).abs() < 0.15, "{m:?}");
        let var = x.iter().map(|v| (v - mean(&x)).powi(2)).sum::<f64>() / x.len() as f64;
        assert!(m.sigma2 < var);
    }

    #[test]
    fn short_series_is_rejected() {
        assert!(fit_arima(&[1.0, 2.0, 3.0], ArimaOrder::default()).is_err());
        assert!(fit_arima(&[1.0, f64::NAN, 3.0, 1.0, 2.0, 1.0], ArimaOrder::default()).is_err());
    }

    #[test]
    fn one_step_uses_given_history() {
        let m = ArimaModel {
            order: ArimaOrder::new(1, 0, 0),
            ar: vec![0.5],
            ma: vec![],
            intercept: 1.0,
            sigma2: 1.0,
            fallback: None,
            series: vec![0.0; 10],
        };
        assert_eq!(one_step_arima(&m, &[9.0, 4.0]).unwrap(), 3.0);
    }

    #[test]
    fn grid_forecast_respects_null_mask_and_clamp() {
        use crate::cube::{chronological_split, GridSpec};
        let grid = GridSpec::new(2, 1, 1.0, vec![1.0, 0.0]).unwrap();
        let s: Vec<f64> = (0..30).map(|t| 0.2 + 0.3 * (29 - t) as f64).collect();
        let cube = SpaceTimeCube::new(grid, 30, [s, vec![0.0; 30]].concat()).unwrap();
        let split = chronological_split(30, 5, 0.0).unwrap();
        let g = ArimaGrid::fit(&cube, &split, ArimaOrder::new(0, 1, 0)).unwrap();
        let f = g.predict_grid(&cube, 25..31).unwrap();
        assert!((f.get(0, 25) - 1.4).abs() < 1e-9);
        assert_eq!(f.get(0, 30), 0.0);
        assert!(f.get(1, 27).is_nan());
    }
}

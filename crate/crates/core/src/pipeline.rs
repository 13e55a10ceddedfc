//! Library-level pipeline steps shared by the CLI and the examples.

use std::time::Instant;

use crate::baselines::{fit_lr, ArimaGrid};
use crate::config::RunConfig;
use crate::cube::{chronological_split, synth_cube, SpaceTimeCube, SplitIndex};
use crate::ensemble::{partition, predict_ensemble, train_ensemble, PredictOptions, Window};
use crate::eval::{score, ClusterLabels, ModelScore};
use crate::forecast::ForecastGrid;
use crate::{Error, Result};

/// Generates the config's synthetic cube and the planted regime labels.
pub fn synth_from_config(cfg: &RunConfig) -> Result<(SpaceTimeCube, ClusterLabels)> {
    let synth = cfg
        .synth
        .as_ref()
        .ok_or_else(|| Error::invalid("config has no [synth] section"))?;
    let grid = cfg.synth_grid()?;
    let (cube, membership) = synth_cube(&grid, synth.weeks, &synth.regimes, cfg.seed)?;
    let labels = ClusterLabels::new(
        grid.width(),
        grid.height(),
        synth.regimes.len(),
        (0..grid.n_cells())
            .map(|c| if grid.is_road(c) { membership[c] } else { None })
            .collect(),
    )?;
    Ok((cube, labels))
}

pub fn split_from_config(cfg: &RunConfig, cube: &SpaceTimeCube) -> Result<SplitIndex> {
    chronological_split(
        cube.weeks(),
        cfg.split.test_weeks,
        cfg.split.validation_fraction,
    )
}

#[derive(Debug, Clone)]
pub struct ModelRun {
    pub name: &'static str,
    pub forecast: ForecastGrid,
    pub score: ModelScore,
    pub seconds: f64,
}

/// Trains LR, ARIMA, the whole-grid ConvLSTM and the window ensemble and
/// scores each one-step-ahead over the test weeks.
pub fn compare_models(
    cube: &SpaceTimeCube,
    cfg: &RunConfig,
    labels: Option<&ClusterLabels>,
) -> Result<Vec<ModelRun>> {
    let split = split_from_config(cfg, cube)?;
    let test = split.test.clone();
    let opts = PredictOptions {
        fallback: cfg.ensemble.fallback,
        significance_factor: cfg.ensemble.significance_factor,
    };
    let mut runs = Vec::new();
    let mut record = |name: &'static str, started: Instant, forecast: ForecastGrid| -> Result<()> {
        let score = score(name, &forecast, cube, labels)?;
        runs.push(ModelRun {
            name,
            forecast,
            score,
            seconds: started.elapsed().as_secs_f64(),
        });
        Ok(())
    };

    let b = &cfg.baselines;
    let t = Instant::now();
    let lr = fit_lr(cube, &split, b.lr_lags, b.lr_ridge)?;
    record("lr", t, lr.predict_grid(cube, test.clone())?)?;

    let t = Instant::now();
    let arima = ArimaGrid::fit(cube, &split, b.arima_order)?;
    record("arima", t, arima.predict_grid(cube, test.clone())?)?;

    let t = Instant::now();
    let global = train_ensemble(cube, &split, &[Window::whole(cube.grid())], &cfg.train, cfg.seed)?;
    record("convlstm-global", t, predict_ensemble(&global, cube, test.clone(), &opts)?)?;

    let t = Instant::now();
    let e = &cfg.ensemble;
    let part = partition(cube.grid(), (e.window[0], e.window[1]), (e.stride[0], e.stride[1]))?;
    let ens = train_ensemble(cube, &split, &part.windows, &cfg.train, cfg.seed)?;
    record("ensemble", t, predict_ensemble(&ens, cube, test, &opts)?)?;
    Ok(runs)
}

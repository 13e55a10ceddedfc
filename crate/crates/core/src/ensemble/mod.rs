//! Moving-window ConvLSTM ensemble.
//!
//! The grid is cut into overlapping windows ([`partition`]), a ConvLSTM is
//! trained per window ([`train_ensemble`]), and per-week window forecasts
//! are merged by the skill-weighted average of [`combine`].

mod archive;
mod combine;
mod partition;
mod window;

pub use archive::{load_ensemble, save_ensemble, ENSEMBLE_FORMAT};
pub use combine::{combine, Member};
pub use partition::{partition, Partition};
pub use window::Window;

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convlstm::{predict_week, train_region, RegionFit, RegionInputs, TrainConfig, TrainedRegion};
use crate::cube::{SpaceTimeCube, SplitIndex};
use crate::forecast::ForecastGrid;
use crate::{Error, Result};

/// Added to validation MSE before inverting it into a weight.
pub const WEIGHT_EPSILON: f64 = 1e-6;

pub fn skill_weight(validation_mse: f64) -> f64 {
    1.0 / (validation_mse + WEIGHT_EPSILON)
}

/// How a road cell outside every window is predicted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    /// Uncovered road cells are an error.
    #[default]
    None,
    /// Last observed week's value.
    Persistence,
}

#[derive(Debug, Clone)]
pub struct WindowModel {
    /// Position of the window in the partition it was trained from.
    pub index: usize,
    pub model: TrainedRegion,
    pub weight: f64,
}

impl WindowModel {
    pub fn window(&self) -> Window {
        self.model.window
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipEntry {
    pub index: usize,
    pub window: Window,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct Ensemble {
    pub grid_width: usize,
    pub grid_height: usize,
    pub models: Vec<WindowModel>,
    pub skipped: Vec<SkipEntry>,
}

/// Trains one model per window, window `i` seeded with `seed_base + i`.
///
/// Windows are trained in parallel on the current rayon pool; results are
/// assembled in window order, so the outcome does not depend on scheduling.
pub fn train_ensemble(
    cube: &SpaceTimeCube,
    split: &SplitIndex,
    windows: &[Window],
    cfg: &TrainConfig,
    seed_base: u64,
) -> Result<Ensemble> {
    let fits: Vec<RegionFit> = windows
        .par_iter()
        .enumerate()
        .map(|(i, w)| {
            let cfg = TrainConfig {
                seed: seed_base.wrapping_add(i as u64),
                ..cfg.clone()
            };
            let fit = train_region(cube, w, split, &cfg);
            if let Ok(RegionFit::Trained(m)) = &fit {
                log::debug!("window {i} {:?}: validation mse {:.6}", w, m.validation_mse);
            }
            fit
        })
        .collect::<Result<_>>()?;

    let mut models = Vec::new();
    let mut skipped = Vec::new();
    for (index, fit) in fits.into_iter().enumerate() {
        match fit {
            RegionFit::Trained(m) => models.push(WindowModel {
                index,
                weight: skill_weight(m.validation_mse),
                model: *m,
            }),
            RegionFit::Skipped { window, reason } => skipped.push(SkipEntry { index, window, reason }),
        }
    }
    if models.is_empty() {
        return Err(Error::invalid("every window is roadless; nothing to train"));
    }
    Ok(Ensemble {
        grid_width: cube.grid().width(),
        grid_height: cube.grid().height(),
        models,
        skipped,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictOptions {
    pub fallback: Fallback,
    /// Drop models whose validation MSE exceeds this multiple of the median.
    pub significance_factor: Option<f64>,
}

fn active_models<'a>(ens: &'a Ensemble, opts: &PredictOptions) -> Vec<&'a WindowModel> {
    let Some(factor) = opts.significance_factor else {
        return ens.models.iter().collect();
    };
    let mut skills: Vec<f64> = ens.models.iter().map(|m| m.model.validation_mse).collect();
    skills.sort_by(f64::total_cmp);
    let mid = skills.len() / 2;
    let median = if skills.len() % 2 == 1 {
        skills[mid]
    } else {
        0.5 * (skills[mid - 1] + skills[mid])
    };
    ens.models
        .iter()
        .filter(|m| m.model.validation_mse <= factor * median)
        .collect()
}

/// One-step-ahead ensemble forecast for every week in `weeks`, each from the
/// observed history before it.
pub fn predict_ensemble(
    ens: &Ensemble,
    cube: &SpaceTimeCube,
    weeks: Range<usize>,
    opts: &PredictOptions,
) -> Result<ForecastGrid> {
    let grid = cube.grid();
    if (grid.width(), grid.height()) != (ens.grid_width, ens.grid_height) {
        return Err(Error::shape(format!(
            "ensemble was trained on a {}x{} grid, cube is {}x{}",
            ens.grid_width,
            ens.grid_height,
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
    let models = active_models(ens, opts);
    let per_model: Vec<Vec<Vec<f64>>> = models
        .par_iter()
        .map(|m| {
            let inputs = RegionInputs::new(cube, &m.model.window, &m.model.scaling)?;
            weeks
                .clone()
                .map(|t| predict_week(&m.model.params, &m.model.scaling, &inputs, m.model.config.lookback, t))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut out = ForecastGrid::empty(grid.width(), grid.height(), weeks.clone());
    for (k, t) in weeks.enumerate() {
        let members: Vec<Member> = models
            .iter()
            .zip(&per_model)
            .map(|(m, preds)| Member {
                window: m.model.window,
                weight: m.weight,
                prediction: &preds[k],
            })
            .collect();
        let fallback = match opts.fallback {
            Fallback::None => None,
            Fallback::Persistence if t > 0 => Some(cube.frame(t - 1)),
            Fallback::Persistence => {
                return Err(Error::invalid("persistence fallback needs a previous week"))
            }
        };
        let frame = combine(grid, &members, fallback.as_deref())?;
        out.set_frame(t, &frame);
    }
    Ok(out)
}

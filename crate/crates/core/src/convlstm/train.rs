//! Region data preparation, Adam and the single-region training loop.

use std::ops::Range;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cell::{forward_sequence_graph, masked_mse_loss, ParamVars};
use super::ConvLSTMParams;
use crate::cube::{SpaceTimeCube, SplitIndex};
use crate::ensemble::Window;
use crate::tensor::{Graph, Tensor, Var};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Weeks of history per sample.
    pub lookback: usize,
    pub hidden_channels: usize,
    pub kernel_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lookback: 8,
            hidden_channels: 8,
            kernel_size: 3,
            epochs: 30,
            learning_rate: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            batch_size: 8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lookback == 0 {
            return Err(Error::invalid("lookback must be at least 1"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if self.hidden_channels == 0 || self.batch_size == 0 {
            return Err(Error::invalid("hidden channels and batch size must be at least 1"));
        }
        if self.kernel_size % 2 == 0 {
            return Err(Error::invalid("kernel size must be odd"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::invalid("Adam betas must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Per-region normalisation constants, fitted on training weeks only.
///
/// The lagged-EPDO input channel is standardised with `target_mean` and
/// `target_std`. The network output is EPDO divided by `output_scale`, so
/// the softplus readout stays nonnegative in model units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub target_mean: f64,
    pub target_std: f64,
    pub output_scale: f64,
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
}

const STD_FLOOR: f64 = 1e-9;

fn mean_std(values: impl Iterator<Item = f64>) -> (f64, f64, usize) {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        return (0.0, 0.0, 0);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt(), v.len())
}

impl Scaling {
    /// `None` when the window holds no road cells or `train` is empty.
    pub fn fit(cube: &SpaceTimeCube, window: &Window, train: Range<usize>) -> Option<Self> {
        let grid = cube.grid();
        let road: Vec<usize> = window
            .grid_cells(grid)
            .into_iter()
            .filter(|c| grid.is_road(*c))
            .collect();
        if road.is_empty() || train.is_empty() {
            return None;
        }
        let (target_mean, target_std, _) = mean_std(
            road.iter()
                .flat_map(|c| train.clone().map(move |t| (*c, t)))
                .map(|(c, t)| cube.raw(c, t)),
        );
        let output_scale = if target_std > STD_FLOOR {
            target_std
        } else {
            target_mean.abs().max(1.0)
        };
        let (feature_mean, feature_std) = cube
            .features()
            .iter()
            .map(|f| {
                let (m, s, _) = mean_std(road.iter().map(|c| f.values[*c]));
                (m, if s > STD_FLOOR { s } else { 1.0 })
            })
            .unzip();
        Some(Self {
            target_mean,
            target_std,
            output_scale,
            feature_mean,
            feature_std,
        })
    }

    fn input_std(&self) -> f64 {
        if self.target_std > STD_FLOOR {
            self.target_std
        } else {
            1.0
        }
    }
}

/// Model-ready frames for one window of a cube.
#[derive(Debug, Clone)]
pub struct RegionInputs {
    pub window: Window,
    /// Grid index of each window cell, row-major.
    pub cells: Vec<usize>,
    pub mask: Vec<bool>,
    /// One `[1 + m, H, W]` tensor per week.
    frames: Vec<Tensor>,
    /// Raw EPDO per week over window cells, `NaN` for null.
    raw: Vec<Vec<f64>>,
}

impl RegionInputs {
    pub fn new(cube: &SpaceTimeCube, window: &Window, scaling: &Scaling) -> Result<Self> {
        let grid = cube.grid();
        if scaling.feature_mean.len() != cube.features().len() {
            return Err(Error::shape(format!(
                "scaling covers {} features, cube has {}",
                scaling.feature_mean.len(),
                cube.features().len()
            )));
        }
        let cells = window.grid_cells(grid);
        let mask: Vec<bool> = cells.iter().map(|c| grid.is_road(*c)).collect();
        let plane = cells.len();
        let channels = 1 + cube.features().len();
        let mut static_part = Vec::with_capacity(plane * (channels - 1));
        for (fi, f) in cube.features().iter().enumerate() {
            for (c, road) in cells.iter().zip(&mask) {
                static_part.push(if *road {
                    (f.values[*c] - scaling.feature_mean[fi]) / scaling.feature_std[fi]
                } else {
                    0.0
                });
            }
        }
        let std = scaling.input_std();
        let mut frames = Vec::with_capacity(cube.weeks());
        let mut raw = Vec::with_capacity(cube.weeks());
        for t in 0..cube.weeks() {
            let week: Vec<f64> = cells.iter().map(|c| cube.raw(*c, t)).collect();
            let mut data = Vec::with_capacity(plane * channels);
            data.extend(week.iter().map(|v| {
                if v.is_nan() {
                    0.0
                } else {
                    (v - scaling.target_mean) / std
                }
            }));
            data.extend_from_slice(&static_part);
            frames.push(Tensor::new(&[channels, window.height, window.width], data)?);
            raw.push(week);
        }
        Ok(Self {
            window: *window,
            cells,
            mask,
            frames,
            raw,
        })
    }

    pub fn channels(&self) -> usize {
        self.frames[0].shape()[0]
    }

    pub fn weeks(&self) -> usize {
        self.frames.len()
    }

    pub fn truth(&self, week: usize) -> &[f64] {
        &self.raw[week]
    }

    fn history(&self, week: usize, lookback: usize) -> Result<&[Tensor]> {
        if week < lookback || week > self.frames.len() {
            return Err(Error::invalid(format!(
                "week {week} needs {lookback} weeks of history inside [0, {})",
                self.frames.len()
            )));
        }
        Ok(&self.frames[week - lookback..week])
    }
}

/// Adaptive moment estimation over a fixed list of tensors.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(sizes: &[usize], lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            lr,
            beta1,
            beta2,
            eps,
            step: 0,
            m: sizes.iter().map(|n| vec![0.0; *n]).collect(),
            v: sizes.iter().map(|n| vec![0.0; *n]).collect(),
        }
    }

    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Vec<f64>]) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step);
        let bc2 = 1.0 - self.beta2.powi(self.step);
        for (i, p) in params.iter_mut().enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for (j, w) in p.data_mut().iter_mut().enumerate() {
                let g = grads[i][j];
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g * g;
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                *w -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

/// Where a region's skill estimate came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationSource {
    Validation,
    /// No validation weeks were available; training samples were scored.
    Train,
}

#[derive(Debug, Clone)]
pub struct TrainedRegion {
    pub window: Window,
    pub params: ConvLSTMParams,
    pub scaling: Scaling,
    pub config: TrainConfig,
    /// One-step-ahead MSE in EPDO units.
    pub validation_mse: f64,
    pub validation_source: ValidationSource,
    /// Mean sample loss (model units) seen during each epoch.
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone)]
pub enum RegionFit {
    Trained(Box<TrainedRegion>),
    Skipped { window: Window, reason: String },
}

fn inverse_softplus(y: f64) -> f64 {
    let y = y.max(1e-3);
    y + (-(-y).exp_m1()).ln()
}

fn sample_loss(
    params: &ConvLSTMParams,
    inputs: &RegionInputs,
    scaling: &Scaling,
    week: usize,
    lookback: usize,
    track: bool,
) -> Result<(Graph, Var, ParamVars)> {
    let mut g = Graph::new();
    let pv = ParamVars::register(&mut g, params, track);
    let xs: Vec<Var> = inputs
        .history(week, lookback)?
        .iter()
        .map(|t| g.constant(t.clone()))
        .collect();
    let pred = forward_sequence_graph(&mut g, &xs, &pv)?;
    let target: Vec<f64> = inputs
        .truth(week)
        .iter()
        .map(|v| v / scaling.output_scale)
        .collect();
    let loss = masked_mse_loss(&mut g, pred, &target, &inputs.mask)?;
    Ok((g, loss, pv))
}

/// One-step-ahead forecast of `week` from the observed weeks before it, in
/// EPDO units over the window cells (`NaN` on null cells).
pub fn predict_week(
    params: &ConvLSTMParams,
    scaling: &Scaling,
    inputs: &RegionInputs,
    lookback: usize,
    week: usize,
) -> Result<Vec<f64>> {
    let mut g = Graph::new();
    let pv = ParamVars::register(&mut g, params, false);
    let xs: Vec<Var> = inputs
        .history(week, lookback)?
        .iter()
        .map(|t| g.constant(t.clone()))
        .collect();
    let out = forward_sequence_graph(&mut g, &xs, &pv)?;
    Ok(g
        .value(out)
        .data()
        .iter()
        .zip(&inputs.mask)
        .map(|(v, road)| if *road { v * scaling.output_scale } else { f64::NAN })
        .collect())
}

fn region_mse(
    params: &ConvLSTMParams,
    scaling: &Scaling,
    inputs: &RegionInputs,
    lookback: usize,
    weeks: impl Iterator<Item = usize>,
) -> Result<Option<f64>> {
    let (mut sum, mut count) = (0.0, 0usize);
    for t in weeks {
        let pred = predict_week(params, scaling, inputs, lookback, t)?;
        for ((p, y), road) in pred.iter().zip(inputs.truth(t)).zip(&inputs.mask) {
            if *road && !y.is_nan() {
                sum += (p - y) * (p - y);
                count += 1;
            }
        }
    }
    Ok((count > 0).then(|| sum / count as f64))
}

/// Trains one ConvLSTM on the cells of `window`.
///
/// Samples are all rolling `(weeks t-L..t-1 → t)` pairs with `t` inside the
/// training range. Mini-batches are drawn in a seeded shuffled order and the
/// batch-mean gradient feeds Adam. The returned skill is the one-step-ahead
/// MSE over validation weeks using observed history.
pub fn train_region(
    cube: &SpaceTimeCube,
    window: &Window,
    split: &SplitIndex,
    cfg: &TrainConfig,
) -> Result<RegionFit> {
    cfg.validate()?;
    if split.weeks() != cube.weeks() {
        return Err(Error::invalid(format!(
            "split covers {} weeks, cube has {}",
            split.weeks(),
            cube.weeks()
        )));
    }
    let Some(scaling) = Scaling::fit(cube, window, split.train.clone()) else {
        return Ok(RegionFit::Skipped {
            window: *window,
            reason: "window contains no road cells".to_string(),
        });
    };
    let inputs = RegionInputs::new(cube, window, &scaling)?;
    let lookback = cfg.lookback;
    let samples: Vec<usize> = (split.train.start + lookback..split.train.end).collect();
    if samples.is_empty() {
        return Err(Error::invalid(format!(
            "training range {:?} is too short for lookback {lookback}",
            split.train
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = ConvLSTMParams::init(inputs.channels(), cfg.hidden_channels, cfg.kernel_size, &mut rng)?;
    params.readout_b.data_mut()[0] =
        inverse_softplus(scaling.target_mean / scaling.output_scale);

    let sizes: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
    let mut adam = Adam::new(&sizes, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_epsilon);
    let mut order = samples.clone();
    let mut history = Vec::with_capacity(cfg.epochs);

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grads: Vec<Vec<f64>> = sizes.iter().map(|n| vec![0.0; *n]).collect();
            for &week in batch {
                let (mut g, loss, pv) = sample_loss(&params, &inputs, &scaling, week, lookback, true)?;
                let l = g.value(loss).data()[0];
                if !l.is_finite() {
                    return Err(Error::NonFinite(format!("training loss at week {week}")));
                }
                epoch_loss += l;
                g.backward(loss)?;
                for (acc, v) in grads.iter_mut().zip(pv.all()) {
                    if let Some(gr) = g.grad(v) {
                        acc.iter_mut().zip(gr.data()).for_each(|(a, b)| *a += b);
                    }
                }
            }
            let inv = 1.0 / batch.len() as f64;
            grads.iter_mut().flatten().for_each(|v| *v *= inv);
            adam.step(&mut params.tensors_mut(), &grads);
        }
        history.push(epoch_loss / samples.len() as f64);
    }

    let val_weeks = split.validation.start.max(lookback)..split.validation.end;
    let (validation_mse, validation_source) =
        match region_mse(&params, &scaling, &inputs, lookback, val_weeks)? {
            Some(mse) => (mse, ValidationSource::Validation),
            None => {
                let mse = region_mse(&params, &scaling, &inputs, lookback, samples.into_iter())?
                    .ok_or_else(|| Error::invalid("no scorable training weeks"))?;
                (mse, ValidationSource::Train)
            }
        };

    Ok(RegionFit::Trained(Box::new(TrainedRegion {
        window: *window,
        params,
        scaling,
        config: cfg.clone(),
        validation_mse,
        validation_source,
        loss_history: history,
    })))
}

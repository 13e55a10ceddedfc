//! Model archive: `model.json` (config, scaling, skill) plus the tensor
//! archive of the 14 parameter tensors.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ConvLSTMParams, Scaling, TrainConfig, TrainedRegion, ValidationSource, PARAM_NAMES};
use crate::archive::{ensure_dir, read_json, write_json, RunStamp};
use crate::ensemble::Window;
use crate::tensor::{load_tensors, save_tensors, Tensor};
use crate::{Error, Result};

pub const MODEL_FORMAT: &str = "crashcast-convlstm";

#[derive(Debug, Serialize, Deserialize)]
struct ModelManifest {
    format: String,
    version: u32,
    window: Window,
    config: TrainConfig,
    scaling: Scaling,
    validation_mse: f64,
    validation_source: ValidationSource,
    loss_history: Vec<f64>,
    #[serde(default)]
    run: Option<RunStamp>,
}

pub fn save_model(dir: &Path, model: &TrainedRegion, run: Option<&RunStamp>) -> Result<()> {
    ensure_dir(dir)?;
    let named: Vec<(String, Tensor)> = PARAM_NAMES
        .iter()
        .zip(model.params.tensors())
        .map(|(n, t)| (n.to_string(), t.clone()))
        .collect();
    save_tensors(dir, &named)?;
    write_json(
        &dir.join("model.json"),
        &ModelManifest {
            format: MODEL_FORMAT.to_string(),
            version: 1,
            window: model.window,
            config: model.config.clone(),
            scaling: model.scaling.clone(),
            validation_mse: model.validation_mse,
            validation_source: model.validation_source,
            loss_history: model.loss_history.clone(),
            run: run.cloned(),
        },
    )
}

pub fn load_model(dir: &Path) -> Result<TrainedRegion> {
    let path = dir.join("model.json");
    let m: ModelManifest = read_json(&path)?;
    if m.format != MODEL_FORMAT {
        return Err(Error::archive(&path, format!("not a ConvLSTM model ({})", m.format)));
    }
    let tensors = load_tensors(dir)?;
    let mut ordered = Vec::with_capacity(PARAM_NAMES.len());
    for name in PARAM_NAMES {
        let t = tensors
            .iter()
            .find(|(n, _)| n == name)
            .ok_or_else(|| Error::archive(dir, format!("missing tensor {name}")))?;
        ordered.push(t.1.clone());
    }
    Ok(TrainedRegion {
        window: m.window,
        params: ConvLSTMParams::from_tensors(ordered)?,
        scaling: m.scaling,
        config: m.config,
        validation_mse: m.validation_mse,
        validation_source: m.validation_source,
        loss_history: m.loss_history,
    })
}

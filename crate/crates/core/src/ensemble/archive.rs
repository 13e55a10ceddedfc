//! Ensemble archive: `manifest.json` listing windows, weights and the skip
//! log, plus one ConvLSTM model archive per window under `window_NNN/`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Ensemble, SkipEntry, Window, WindowModel};
use crate::archive::{ensure_dir, read_json, write_json, RunStamp};
use crate::convlstm::{load_model, save_model};
use crate::{Error, Result};

pub const ENSEMBLE_FORMAT: &str = "crashcast-ensemble";

#[derive(Debug, Serialize, Deserialize)]
struct MemberEntry {
    index: usize,
    window: Window,
    weight: f64,
    validation_mse: f64,
    path: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EnsembleManifest {
    pub format: String,
    pub version: u32,
    /// Free-form label, e.g. `ensemble` or `convlstm-global`.
    pub kind: String,
    pub grid_width: usize,
    pub grid_height: usize,
    members: Vec<MemberEntry>,
    pub skipped: Vec<SkipEntry>,
    #[serde(default)]
    pub run: Option<RunStamp>,
}

pub fn save_ensemble(dir: &Path, ens: &Ensemble, kind: &str, run: Option<&RunStamp>) -> Result<()> {
    ensure_dir(dir)?;
    let mut members = Vec::with_capacity(ens.models.len());
    for m in &ens.models {
        let path = format!("window_{:03}", m.index);
        save_model(&dir.join(&path), &m.model, run)?;
        members.push(MemberEntry {
            index: m.index,
            window: m.window(),
            weight: m.weight,
            validation_mse: m.model.validation_mse,
            path,
        });
    }
    write_json(
        &dir.join("manifest.json"),
        &EnsembleManifest {
            format: ENSEMBLE_FORMAT.to_string(),
            version: 1,
            kind: kind.to_string(),
            grid_width: ens.grid_width,
            grid_height: ens.grid_height,
            members,
            skipped: ens.skipped.clone(),
            run: run.cloned(),
        },
    )
}

pub fn load_ensemble(dir: &Path) -> Result<(Ensemble, EnsembleManifest)> {
    let path = dir.join("manifest.json");
    let manifest: EnsembleManifest = read_json(&path)?;
    if manifest.format != ENSEMBLE_FORMAT {
        return Err(Error::archive(&path, format!("not an ensemble archive ({})", manifest.format)));
    }
    let mut models = Vec::with_capacity(manifest.members.len());
    for e in &manifest.members {
        let model = load_model(&dir.join(&e.path))?;
        if model.window != e.window {
            return Err(Error::archive(&path, format!("window mismatch for member {}", e.index)));
        }
        models.push(WindowModel {
            index: e.index,
            model,
            weight: e.weight,
        });
    }
    Ok((
        Ensemble {
            grid_width: manifest.grid_width,
            grid_height: manifest.grid_height,
            models,
            skipped: manifest.skipped.clone(),
        },
        manifest,
    ))
}

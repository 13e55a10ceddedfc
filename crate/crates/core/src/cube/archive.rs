//! Cube archive: a directory holding `manifest.json` plus flat `f64` blobs.
//!
//! ```text
//! <dir>/manifest.json     grid dims, cell size, weeks, feature names, run stamp
//! <dir>/road_length.f64   n values
//! <dir>/target.f64        n*T values, cell-major, NaN marks null cells
//! <dir>/features.f64      m*n values, feature-major, in manifest order
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{GridSpec, SpaceTimeCube};
use crate::archive::{ensure_dir, read_f64s, read_json, write_f64s, write_json, RunStamp};
use crate::{Error, Result};

pub const CUBE_FORMAT_VERSION: u32 = 1;
const CUBE_FORMAT: &str = "crashcast-cube";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeManifest {
    pub format: String,
    pub version: u32,
    pub width: usize,
    pub height: usize,
    pub cell_size_miles: f64,
    pub weeks: usize,
    pub feature_names: Vec<String>,
    pub null_sentinel: String,
    pub layout: String,
    #[serde(default)]
    pub week_labels: Option<Vec<String>>,
    #[serde(default)]
    pub run: Option<RunStamp>,
}

pub fn save_cube(dir: &Path, cube: &SpaceTimeCube, run: Option<&RunStamp>) -> Result<()> {
    ensure_dir(dir)?;
    let grid = cube.grid();
    let manifest = CubeManifest {
        format: CUBE_FORMAT.to_string(),
        version: CUBE_FORMAT_VERSION,
        width: grid.width(),
        height: grid.height(),
        cell_size_miles: grid.cell_size_miles(),
        weeks: cube.weeks(),
        feature_names: cube.features().iter().map(|f| f.name.clone()).collect(),
        null_sentinel: "NaN".to_string(),
        layout: "little-endian f64; target cell-major (cell = y*width + x)".to_string(),
        week_labels: cube.week_labels().map(|l| l.to_vec()),
        run: run.cloned(),
    };
    write_f64s(&dir.join("road_length.f64"), grid.road_length_miles())?;
    write_f64s(&dir.join("target.f64"), cube.target_raw())?;
    let features: Vec<f64> = cube
        .features()
        .iter()
        .flat_map(|f| f.values.iter().copied())
        .collect();
    write_f64s(&dir.join("features.f64"), &features)?;
    write_json(&dir.join("manifest.json"), &manifest)
}

pub fn load_cube(dir: &Path) -> Result<SpaceTimeCube> {
    let (cube, _) = load_cube_with_manifest(dir)?;
    Ok(cube)
}

pub fn load_cube_with_manifest(dir: &Path) -> Result<(SpaceTimeCube, CubeManifest)> {
    let manifest_path = dir.join("manifest.json");
    let manifest: CubeManifest = read_json(&manifest_path)?;
    if manifest.format != CUBE_FORMAT {
        return Err(Error::archive(
            &manifest_path,
            format!("not a cube archive (format {:?})", manifest.format),
        ));
    }
    if manifest.version != CUBE_FORMAT_VERSION {
        return Err(Error::archive(
            &manifest_path,
            format!("unsupported cube version {}", manifest.version),
        ));
    }
    let n = manifest.width * manifest.height;
    let road = read_f64s(&dir.join("road_length.f64"), n)?;
    let grid = GridSpec::new(manifest.width, manifest.height, manifest.cell_size_miles, road)?;
    let target = read_f64s(&dir.join("target.f64"), n * manifest.weeks)?;
    let features = read_f64s(&dir.join("features.f64"), n * manifest.feature_names.len())?;
    let mut cube = SpaceTimeCube::new(grid, manifest.weeks, target)?;
    for (i, name) in manifest.feature_names.iter().enumerate() {
        cube = cube.with_feature(name.clone(), features[i * n..(i + 1) * n].to_vec())?;
    }
    if let Some(labels) = &manifest.week_labels {
        cube = cube.with_week_labels(labels.clone())?;
    }
    Ok((cube, manifest))
}

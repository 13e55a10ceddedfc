//! Run configuration: one TOML file drives every command of a pipeline.
//!
//! The config hash is the SHA-256 of the config's canonical JSON form and is
//! stamped into every output manifest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::ArimaOrder;
use crate::convlstm::TrainConfig;
use crate::cube::{GridSpec, RegimeSpec, SeverityWeights};
use crate::ensemble::Fallback;
use crate::eval::default_radii;
use crate::{Error, Result};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub seed: u64,
    pub grid: GridConfig,
    pub severity: SeverityWeights,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ingest: Option<IngestConfig>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub baselines: BaselineConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub width: usize,
    pub height: usize,
    pub cell_size_miles: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    pub test_weeks: usize,
    pub validation_fraction: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            test_weeks: 52,
            validation_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub weeks: usize,
    /// Road length of every road cell.
    #[serde(default = "one")]
    pub road_length: f64,
    /// Rectangles of cells without roads.
    #[serde(default)]
    pub roadless: Vec<Rect>,
    pub regimes: Vec<RegimeSpec>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestConfig {
    pub weeks: usize,
    pub crashes: PathBuf,
    /// Static features; the `road_length` feature also defines the road mask.
    pub features: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleConfig {
    pub window: [usize; 2],
    pub stride: [usize; 2],
    pub fallback: Fallback,
    pub significance_factor: Option<f64>,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            window: [10, 10],
            stride: [5, 5],
            fallback: Fallback::None,
            significance_factor: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineConfig {
    pub lr_lags: usize,
    pub lr_ridge: f64,
    pub arima_order: ArimaOrder,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            lr_lags: 8,
            lr_ridge: crate::baselines::DEFAULT_RIDGE,
            arima_order: ArimaOrder::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationConfig {
    pub radii: Vec<f64>,
    pub cluster_k: usize,
    pub max_swaps: usize,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            radii: default_radii(),
            cluster_k: 3,
            max_swaps: crate::eval::DEFAULT_MAX_SWAPS,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config file. Relative ingest paths resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e
                .span()
                .map(|s| text[..s.start].lines().count().max(1))
                .unwrap_or(0),
            reason: e.message().to_string(),
        })?;
        if let (Some(ingest), Some(base)) = (cfg.ingest.as_mut(), path.parent()) {
            for p in [&mut ingest.crashes, &mut ingest.features] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::invalid(format!("config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::invalid(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        self.severity.validate()?;
        self.train.validate()?;
        if !(0.0..1.0).contains(&self.split.validation_fraction) {
            return Err(Error::invalid("split.validation_fraction must lie in [0, 1)"));
        }
        if self.ensemble.window.contains(&0) || self.ensemble.stride.contains(&0) {
            return Err(Error::invalid("ensemble window and stride must be positive"));
        }
        if let Some(f) = self.ensemble.significance_factor {
            if !(f > 0.0 && f.is_finite()) {
                return Err(Error::invalid("ensemble.significance_factor must be positive"));
            }
        }
        if self.evaluation.radii.is_empty()
            || self.evaluation.radii.windows(2).any(|w| !(w[0] <= w[1]))
        {
            return Err(Error::invalid("evaluation.radii must be a nonempty ascending list"));
        }
        if self.evaluation.cluster_k == 0 {
            return Err(Error::invalid("evaluation.cluster_k must be at least 1"));
        }
        if self.synth.is_none() && self.ingest.is_none() {
            return Err(Error::invalid("config needs a [synth] or an [ingest] section"));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON serialisation.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serialises");
        hex::encode(Sha256::digest(&json))
    }

    /// Grid for a synthetic run: uniform road length minus roadless rects.
    pub fn synth_grid(&self) -> Result<GridSpec> {
        let synth = self
            .synth
            .as_ref()
            .ok_or_else(|| Error::invalid("config has no [synth] section"))?;
        let (w, h) = (self.grid.width, self.grid.height);
        let mut road = vec![synth.road_length; w * h];
        for r in &synth.roadless {
            if r.x0 + r.width > w || r.y0 + r.height > h {
                return Err(Error::invalid(format!("roadless rectangle {r:?} leaves the grid")));
            }
            for y in r.y0..r.y0 + r.height {
                for x in r.x0..r.x0 + r.width {
                    road[y * w + x] = 0.0;
                }
            }
        }
        GridSpec::new(w, h, self.grid.cell_size_miles, road)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
version = 1
seed = 3

[grid]
width = 4
height = 4
cell_size_miles = 5.0

[severity]
K = 12.0
A = 12.0
B = 3.0
C = 3.0
O = 1.0

[synth]
weeks = 30
roadless = [{ x0 = 0, y0 = 0, width = 1, height = 1 }]

[[synth.regimes]]
x0 = 0
y0 = 0
width = 4
height = 4
level = 1.0
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = RunConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.split.test_weeks, 52);
        assert_eq!(cfg.ensemble.stride, [5, 5]);
        assert_eq!(cfg.baselines.arima_order, ArimaOrder::new(1, 0, 1));
        assert_eq!(cfg.evaluation.radii.len(), 11);
        let grid = cfg.synth_grid().unwrap();
        assert_eq!(grid.n_road_cells(), 15);
    }

    #[test]
    fn round_trip_preserves_hash() {
        let cfg = RunConfig::from_toml_str(MINIMAL).unwrap();
        let again = RunConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.hash(), again.hash());
        assert_eq!(cfg.hash().len(), 64);
        let mut other = cfg.clone();
        other.seed += 1;
        assert_ne!(cfg.hash(), other.hash());
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(RunConfig::from_toml_str(&MINIMAL.replace("O = 1.0", "O = 2.0")).is_err());
        assert!(RunConfig::from_toml_str(&MINIMAL.replace("version = 1", "version = 2")).is_err());
        assert!(RunConfig::from_toml_str(&format!("{MINIMAL}\n[extra]\nx = 1\n")).is_err());
        let no_severity = MINIMAL.replace("[severity]", "[unused]");
        assert!(RunConfig::from_toml_str(&no_severity).is_err());
    }
}

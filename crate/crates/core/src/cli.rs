//! Command-line driver. Every command reads and writes files only; each
//! output directory gets a manifest carrying the run stamp.
//!
//! Environment: `CRASHCAST_LOG` sets log verbosity (`env_logger` syntax) and
//! `CRASHCAST_WORKERS` the default worker count.

use std::ffi::OsString;
use std::ops::Range;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use serde::{Deserialize, Serialize};

use crate::archive::{ensure_dir, read_json, write_json, RunStamp};
use crate::baselines::{fit_lr, ArimaGrid, LinearModel};
use crate::config::RunConfig;
use crate::cube::{
    build_cube, load_crash_csv, load_cube_with_manifest, load_features_csv,
    save_cube, GridSpec, SpaceTimeCube, SplitIndex,
};
use crate::ensemble::{
    load_ensemble, partition, predict_ensemble, save_ensemble, train_ensemble, PredictOptions,
    Window, ENSEMBLE_FORMAT,
};
use crate::eval::{cluster_dtw, crossk_evaluate, score, ClusterLabels, EvalReport};
use crate::forecast::ForecastGrid;
use crate::pipeline::{split_from_config, synth_from_config};
use crate::{Error, Result};

pub const LR_FORMAT: &str = "crashcast-lr";
pub const ARIMA_FORMAT: &str = "crashcast-arima";
pub const FORECAST_FORMAT: &str = "crashcast-forecast";
pub const OUTPUT_FORMAT: &str = "crashcast-output";

#[derive(Debug, Parser)]
#[command(name = "crashcast", version, about = "Gridded weekly crash-risk forecasting")]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to CRASHCAST_WORKERS or the number of cores.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic cube from the config's [synth] section.
    Synth,
    /// Build a cube from crash and feature CSVs.
    Ingest {
        #[arg(long)]
        crashes: Option<PathBuf>,
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Train the moving-window ConvLSTM ensemble.
    TrainEnsemble {
        #[arg(long)]
        cube: PathBuf,
    },
    /// Train a reference model.
    TrainBaseline {
        kind: BaselineKind,
        #[arg(long)]
        cube: PathBuf,
    },
    /// Forecast with a trained model, one step ahead over the test weeks.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        cube: PathBuf,
        /// Absolute week range `start..end`; defaults to the test weeks.
        #[arg(long)]
        weeks: Option<String>,
    },
    /// Score forecasts against a cube.
    Evaluate {
        #[arg(long)]
        cube: PathBuf,
        /// `NAME=DIR` of a predict output; repeatable.
        #[arg(long = "forecast", value_name = "NAME=DIR", required = true)]
        forecasts: Vec<String>,
        /// Cluster labels CSV for per-cluster scores.
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// DTW k-medoids risk zones over the training weeks.
    Cluster {
        #[arg(long)]
        cube: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaselineKind {
    Lr,
    Arima,
    ConvlstmGlobal,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile<T> {
    format: String,
    run: RunStamp,
    model: T,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ForecastManifest {
    pub format: String,
    pub run: RunStamp,
    pub model_format: String,
    pub width: usize,
    pub height: usize,
    pub weeks: [usize; 2],
}

#[derive(Debug, Serialize, Deserialize)]
pub struct OutputManifest {
    pub format: String,
    pub command: String,
    pub run: RunStamp,
    pub files: Vec<String>,
}

/// Parses arguments, runs the command on a pool of the requested size and
/// returns the process exit code.
pub fn main() -> i32 {
    main_from(std::env::args_os())
}

pub fn main_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("CRASHCAST_LOG", "warn"))
        .format_timestamp(None)
        .try_init();
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("crashcast: {e}");
            1
        }
    }
}

fn worker_count(flag: Option<usize>) -> Result<usize> {
    if let Some(n) = flag {
        return Ok(n);
    }
    match std::env::var("CRASHCAST_WORKERS") {
        Ok(v) => v
            .parse()
            .map_err(|_| Error::invalid(format!("CRASHCAST_WORKERS={v:?} is not a count"))),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let workers = worker_count(cli.workers)?;
    if workers == 0 {
        return Err(Error::invalid("--workers must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid(format!("worker pool: {e}")))?;
    pool.install(|| dispatch(cli))
}

struct Ctx {
    cfg: RunConfig,
    stamp: RunStamp,
    out: PathBuf,
}

impl Ctx {
    fn new(cli: &Cli) -> Result<Self> {
        let path = cli
            .config
            .as_ref()
            .ok_or_else(|| Error::invalid("--config is required"))?;
        let mut cfg = RunConfig::load(path)?;
        if let Some(seed) = cli.seed {
            cfg.seed = seed;
        }
        let out = cli
            .out
            .clone()
            .ok_or_else(|| Error::invalid("--out is required"))?;
        let stamp = RunStamp::new(cfg.hash(), cfg.seed);
        Ok(Self { cfg, stamp, out })
    }

    fn check(&self, run: Option<&RunStamp>, artifact: &Path) -> Result<()> {
        match run {
            Some(r) if r.config_hash != self.stamp.config_hash => Err(Error::archive(
                artifact,
                format!(
                    "config hash {} does not match the current config ({})",
                    r.config_hash, self.stamp.config_hash
                ),
            )),
            _ => Ok(()),
        }
    }

    fn load_cube(&self, dir: &Path) -> Result<SpaceTimeCube> {
        let (cube, manifest) = load_cube_with_manifest(dir)?;
        self.check(manifest.run.as_ref(), dir)?;
        Ok(cube)
    }

    fn split(&self, cube: &SpaceTimeCube) -> Result<SplitIndex> {
        split_from_config(&self.cfg, cube)
    }

    fn write_output_manifest(&self, command: &str, files: &[&str]) -> Result<()> {
        write_json(
            &self.out.join("manifest.json"),
            &OutputManifest {
                format: OUTPUT_FORMAT.into(),
                command: command.into(),
                run: self.stamp.clone(),
                files: files.iter().map(|f| f.to_string()).collect(),
            },
        )
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    let ctx = Ctx::new(cli)?;
    match &cli.command {
        Command::Synth => cmd_synth(&ctx),
        Command::Ingest { crashes, features } => cmd_ingest(&ctx, crashes.as_deref(), features.as_deref()),
        Command::TrainEnsemble { cube } => cmd_train_ensemble(&ctx, cube),
        Command::TrainBaseline { kind, cube } => cmd_train_baseline(&ctx, *kind, cube),
        Command::Predict { model, cube, weeks } => cmd_predict(&ctx, model, cube, weeks.as_deref()),
        Command::Evaluate {
            cube,
            forecasts,
            labels,
        } => cmd_evaluate(&ctx, cube, forecasts, labels.as_deref()),
        Command::Cluster { cube } => cmd_cluster(&ctx, cube),
    }
}

fn cmd_synth(ctx: &Ctx) -> Result<()> {
    let (cube, labels) = synth_from_config(&ctx.cfg)?;
    save_cube(&ctx.out, &cube, Some(&ctx.stamp))?;
    labels.write_csv(&ctx.out.join("regimes.csv"))?;
    info!(
        "synthetic cube with {} road cells written to {}",
        cube.grid().n_road_cells(),
        ctx.out.display()
    );
    Ok(())
}

fn cmd_ingest(ctx: &Ctx, crashes: Option<&Path>, features: Option<&Path>) -> Result<()> {
    let ingest = ctx.cfg.ingest.as_ref();
    let crashes = crashes
        .map(Path::to_path_buf)
        .or_else(|| ingest.map(|i| i.crashes.clone()))
        .ok_or_else(|| Error::invalid("no crash CSV given (--crashes or [ingest].crashes)"))?;
    let features = features
        .map(Path::to_path_buf)
        .or_else(|| ingest.map(|i| i.features.clone()))
        .ok_or_else(|| Error::invalid("no feature CSV given (--features or [ingest].features)"))?;
    let weeks = ingest
        .map(|i| i.weeks)
        .ok_or_else(|| Error::invalid("config has no [ingest] section"))?;
    let (w, h) = (ctx.cfg.grid.width, ctx.cfg.grid.height);

    // features keep first-seen order; cells without a value read as 0
    let rows = load_features_csv(&features)?;
    let mut names: Vec<String> = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    for r in &rows {
        if r.cell_x >= w || r.cell_y >= h {
            return Err(Error::invalid(format!(
                "{}: feature cell ({}, {}) outside the {w}x{h} grid",
                features.display(),
                r.cell_x,
                r.cell_y
            )));
        }
        let k = match names.iter().position(|n| *n == r.feature_name) {
            Some(k) => k,
            None => {
                names.push(r.feature_name.clone());
                values.push(vec![0.0; w * h]);
                names.len() - 1
            }
        };
        values[k][r.cell_y * w + r.cell_x] = r.value;
    }
    let road = names
        .iter()
        .position(|n| n == "road_length")
        .map(|k| values[k].clone())
        .ok_or_else(|| {
            Error::invalid(format!("{}: no road_length feature", features.display()))
        })?;
    let grid = GridSpec::new(w, h, ctx.cfg.grid.cell_size_miles, road)?;
    let records = load_crash_csv(&crashes)?;
    let mut cube = build_cube(&records, &grid, &ctx.cfg.severity, weeks)?;
    for (name, v) in names.into_iter().zip(values) {
        cube = cube.with_feature(name, v)?;
    }
    save_cube(&ctx.out, &cube, Some(&ctx.stamp))
}

fn cmd_train_ensemble(ctx: &Ctx, cube_dir: &Path) -> Result<()> {
    let cube = ctx.load_cube(cube_dir)?;
    let split = ctx.split(&cube)?;
    let e = &ctx.cfg.ensemble;
    let part = partition(
        cube.grid(),
        (e.window[0], e.window[1]),
        (e.stride[0], e.stride[1]),
    )?;
    info!("training {} windows", part.windows.len());
    let ens = train_ensemble(&cube, &split, &part.windows, &ctx.cfg.train, ctx.cfg.seed)?;
    save_ensemble(&ctx.out, &ens, "ensemble", Some(&ctx.stamp))
}

fn cmd_train_baseline(ctx: &Ctx, kind: BaselineKind, cube_dir: &Path) -> Result<()> {
    let cube = ctx.load_cube(cube_dir)?;
    let split = ctx.split(&cube)?;
    let b = &ctx.cfg.baselines;
    ensure_dir(&ctx.out)?;
    match kind {
        BaselineKind::Lr => {
            let model = fit_lr(&cube, &split, b.lr_lags, b.lr_ridge)?;
            write_model(ctx, LR_FORMAT, model)
        }
        BaselineKind::Arima => {
            let model = ArimaGrid::fit(&cube, &split, b.arima_order)?;
            if model.n_fallbacks() > 0 {
                info!("{} cells fell back to a constant forecast", model.n_fallbacks());
            }
            write_model(ctx, ARIMA_FORMAT, model)
        }
        BaselineKind::ConvlstmGlobal => {
            let ens = train_ensemble(
                &cube,
                &split,
                &[Window::whole(cube.grid())],
                &ctx.cfg.train,
                ctx.cfg.seed,
            )?;
            save_ensemble(&ctx.out, &ens, "convlstm-global", Some(&ctx.stamp))
        }
    }
}

fn write_model<T: Serialize>(ctx: &Ctx, format: &str, model: T) -> Result<()> {
    write_json(
        &ctx.out.join("manifest.json"),
        &ModelFile {
            format: format.into(),
            run: ctx.stamp.clone(),
            model,
        },
    )
}

fn parse_weeks(text: &str) -> Result<Range<usize>> {
    let bad = || Error::invalid(format!("--weeks {text:?} is not of the form START..END"));
    let (a, b) = text.split_once("..").ok_or_else(bad)?;
    let (a, b): (usize, usize) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
    if a >= b {
        return Err(bad());
    }
    Ok(a..b)
}

#[derive(Deserialize)]
struct FormatProbe {
    format: String,
}

fn cmd_predict(ctx: &Ctx, model_dir: &Path, cube_dir: &Path, weeks: Option<&str>) -> Result<()> {
    let cube = ctx.load_cube(cube_dir)?;
    let weeks = match weeks {
        Some(w) => parse_weeks(w)?,
        None => ctx.split(&cube)?.test,
    };
    let manifest_path = model_dir.join("manifest.json");
    let probe: FormatProbe = read_json(&manifest_path)?;
    let forecast = match probe.format.as_str() {
        ENSEMBLE_FORMAT => {
            let (ens, manifest) = load_ensemble(model_dir)?;
            ctx.check(manifest.run.as_ref(), model_dir)?;
            let opts = PredictOptions {
                fallback: ctx.cfg.ensemble.fallback,
                significance_factor: ctx.cfg.ensemble.significance_factor,
            };
            predict_ensemble(&ens, &cube, weeks.clone(), &opts)
                .map_err(|e| Error::archive(model_dir, e.to_string()))?
        }
        LR_FORMAT => {
            let f: ModelFile<LinearModel> = read_json(&manifest_path)?;
            ctx.check(Some(&f.run), model_dir)?;
            f.model.predict_grid(&cube, weeks.clone())?
        }
        ARIMA_FORMAT => {
            let f: ModelFile<ArimaGrid> = read_json(&manifest_path)?;
            ctx.check(Some(&f.run), model_dir)?;
            f.model.predict_grid(&cube, weeks.clone())?
        }
        other => {
            return Err(Error::archive(model_dir, format!("unknown model format {other:?}")));
        }
    };
    ensure_dir(&ctx.out)?;
    forecast.write_csv(&ctx.out.join("forecast.csv"))?;
    write_json(
        &ctx.out.join("manifest.json"),
        &ForecastManifest {
            format: FORECAST_FORMAT.into(),
            run: ctx.stamp.clone(),
            model_format: probe.format,
            width: forecast.width(),
            height: forecast.height(),
            weeks: [weeks.start, weeks.end],
        },
    )
}

/// Reads a `predict` output directory.
pub fn load_forecast(dir: &Path) -> Result<(ForecastGrid, ForecastManifest)> {
    let manifest: ForecastManifest = read_json(&dir.join("manifest.json"))?;
    if manifest.format != FORECAST_FORMAT {
        return Err(Error::archive(dir, format!("not a forecast ({})", manifest.format)));
    }
    let grid = ForecastGrid::read_csv(
        &dir.join("forecast.csv"),
        manifest.width,
        manifest.height,
        manifest.weeks[0]..manifest.weeks[1],
    )?;
    Ok((grid, manifest))
}

fn cmd_evaluate(ctx: &Ctx, cube_dir: &Path, forecasts: &[String], labels: Option<&Path>) -> Result<()> {
    let cube = ctx.load_cube(cube_dir)?;
    let grid = cube.grid();
    let labels = labels
        .map(|p| ClusterLabels::read_csv(p, grid.width(), grid.height()))
        .transpose()?;
    let mut report = EvalReport {
        run: Some(ctx.stamp.clone()),
        test_weeks: [0, 0],
        models: Vec::new(),
        cross_k: Vec::new(),
    };
    let mut files = vec!["report.json".to_string()];
    ensure_dir(&ctx.out)?;
    for spec in forecasts {
        let (name, dir) = spec
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("--forecast {spec:?} is not NAME=DIR")))?;
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return Err(Error::invalid(format!("forecast name {name:?} must be alphanumeric")));
        }
        let dir = Path::new(dir);
        let (forecast, manifest) = load_forecast(dir)?;
        ctx.check(Some(&manifest.run), dir)?;
        report.test_weeks = manifest.weeks;
        let s = score(name, &forecast, &cube, labels.as_ref())
            .map_err(|e| Error::archive(dir, e.to_string()))?;
        let curve = crossk_evaluate(&forecast, &cube, &ctx.cfg.evaluation.radii)
            .map_err(|e| Error::archive(dir, e.to_string()))?;
        let csv = format!("crossk_{name}.csv");
        curve.write_csv(&ctx.out.join(&csv))?;
        files.push(csv);
        report.models.push(s);
        report.cross_k.push((name.to_string(), curve));
    }
    report.write_json(&ctx.out.join("report.json"))?;
    let files: Vec<&str> = files.iter().map(String::as_str).collect();
    ctx.write_output_manifest("evaluate", &files)
}

fn cmd_cluster(ctx: &Ctx, cube_dir: &Path) -> Result<()> {
    let cube = ctx.load_cube(cube_dir)?;
    let split = ctx.split(&cube)?;
    let ev = &ctx.cfg.evaluation;
    let labels = cluster_dtw(&cube, split.train.clone(), ev.cluster_k, ctx.cfg.seed, ev.max_swaps)?;
    ensure_dir(&ctx.out)?;
    labels.write_csv(&ctx.out.join("labels.csv"))?;
    ctx.write_output_manifest("cluster", &["labels.csv"])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn week_ranges() {
        assert_eq!(parse_weeks("157..209").unwrap(), 157..209);
        assert!(parse_weeks("5..5").is_err());
        assert!(parse_weeks("5-9").is_err());
    }

    #[test]
    fn parses_subcommands() {
        let cli = Cli::try_parse_from([
            "crashcast", "train-baseline", "convlstm-global", "--cube", "c", "--config", "x.toml", "--out", "o",
        ])
        .unwrap();
        assert!(matches!(cli.command, Command::TrainBaseline { kind: BaselineKind::ConvlstmGlobal, .. }));
        assert!(Cli::try_parse_from(["crashcast", "evaluate", "--cube", "c"]).is_err());
    }
}

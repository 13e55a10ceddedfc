//! Heterogeneous synthetic benchmark: LR, per-cell ARIMA, one whole-grid
//! ConvLSTM and the moving-window ensemble, scored overall and per regime.
//!
//! cargo run --release --example benchmark [-- path/to/config.toml]
//!
//! Defaults to `configs/benchmark.toml` (several minutes on one core);
//! `configs/example.toml` runs in seconds.

use std::path::PathBuf;

use crashcast::config::RunConfig;
use crashcast::pipeline::{compare_models, synth_from_config};

fn main() -> crashcast::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/benchmark.toml"));
    let cfg = RunConfig::load(&path)?;
    let (cube, regimes) = synth_from_config(&cfg)?;
    let names: Vec<String> = cfg
        .synth
        .iter()
        .flat_map(|s| s.regimes.iter().map(|r| r.name.clone()))
        .collect();
    println!("config {} (hash {})", path.display(), &cfg.hash()[..12]);

    let runs = compare_models(&cube, &cfg, Some(&regimes))?;
    print!("{:<16} {:>9} {:>9}", "model", "MSE", "RMSE");
    for n in &names {
        print!(" {n:>15}");
    }
    println!(" {:>8}", "seconds");
    for r in &runs {
        print!("{:<16} {:>9.5} {:>9.5}", r.name, r.score.all_regions.mse, r.score.all_regions.rmse);
        for c in &r.score.clusters {
            print!(" {:>15.5}", c.stats.mse);
        }
        println!(" {:>8.1}", r.seconds);
    }
    Ok(())
}

//! Partition a grid into overlapping windows, train one ConvLSTM per window
//! and merge their forecasts with the skill-weighted combiner.
//!
//! cargo run --release --example window_ensemble

use crashcast::convlstm::TrainConfig;
use crashcast::cube::{chronological_split, synth_cube, GridSpec, RegimeSpec};
use crashcast::ensemble::{
    combine, partition, predict_ensemble, train_ensemble, Fallback, Member, PredictOptions, Window,
};
use crashcast::eval::score;

fn main() -> crashcast::Result<()> {
    // the combiner on its own: two windows overlapping in one cell
    let grid = GridSpec::uniform(3, 1, 1.0, 1.0)?;
    let left = Window { x0: 0, y0: 0, width: 2, height: 1 };
    let right = Window { x0: 1, y0: 0, width: 2, height: 1 };
    let merged = combine(
        &grid,
        &[
            Member { window: left, weight: 1.0, prediction: &[1.0, 1.0] },
            Member { window: right, weight: 3.0, prediction: &[3.0, 3.0] },
        ],
        None,
    )?;
    println!("combined: {merged:?}");

    let grid = GridSpec::uniform(12, 8, 5.0, 1.0)?;
    let regimes = [
        RegimeSpec { name: "low".into(), x0: 0, y0: 0, width: 6, height: 8, level: 0.6, slope: 0.003, amplitude: 0.1, noise: 0.1, exposure: 1.0 },
        RegimeSpec { name: "high".into(), x0: 6, y0: 0, width: 6, height: 8, level: 3.0, slope: 0.0, amplitude: 1.0, noise: 0.5, exposure: 3.0 },
    ];
    let (cube, _) = synth_cube(&grid, 120, &regimes, 3)?;
    let split = chronological_split(120, 20, 0.1)?;
    let part = partition(&grid, (6, 6), (3, 2))?;
    println!("{} windows, {} uncovered cells", part.windows.len(), part.uncovered.len());

    let cfg = TrainConfig { lookback: 4, hidden_channels: 3, epochs: 8, ..TrainConfig::default() };
    let ens = train_ensemble(&cube, &split, &part.windows, &cfg, 10)?;
    for m in &ens.models {
        println!("window {:>2} {:?}: validation MSE {:.4}, weight {:.2}", m.index, m.window(), m.model.validation_mse, m.weight);
    }
    let opts = PredictOptions { fallback: Fallback::Persistence, significance_factor: None };
    let forecast = predict_ensemble(&ens, &cube, split.test.clone(), &opts)?;
    println!("ensemble test MSE {:.4}", score("ensemble", &forecast, &cube, None)?.all_regions.mse);

    let whole = train_ensemble(&cube, &split, &[Window::whole(&grid)], &cfg, 10)?;
    let forecast = predict_ensemble(&whole, &cube, split.test.clone(), &opts)?;
    println!("single whole-grid model test MSE {:.4}", score("global", &forecast, &cube, None)?.all_regions.mse);
    Ok(())
}

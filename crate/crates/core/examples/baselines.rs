//! Fit the reference forecasters: pooled ridge regression on lagged EPDO
//! and per-cell ARIMA by conditional sum of squares.
//!
//! cargo run --release --example baselines

use crashcast::baselines::{fit_arima, fit_lr, forecast_arima, ArimaGrid, ArimaOrder, DEFAULT_RIDGE};
use crashcast::cube::{chronological_split, synth_cube, GridSpec, RegimeSpec};
use crashcast::eval::score;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> crashcast::Result<()> {
    // AR(1) with φ = 0.8
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let noise = Normal::new(0.0, 0.1).expect("valid sigma");
    let mut x = vec![0.0];
    for _ in 1..500 {
        let prev = x[x.len() - 1];
        x.push(0.8 * prev + noise.sample(&mut rng));
    }
    let m = fit_arima(&x, ArimaOrder::new(1, 0, 0))?;
    println!("AR(1): φ = {:.3}, c = {:.4}, σ² = {:.4}", m.ar[0], m.intercept, m.sigma2);

    let ramp: Vec<f64> = (0..20).map(|t| 2.0 + 0.25 * t as f64).collect();
    let m = fit_arima(&ramp, ArimaOrder::new(0, 1, 0))?;
    println!("random walk with drift continues the ramp: {:?}", forecast_arima(&m, 3));

    let grid = GridSpec::uniform(10, 10, 5.0, 1.0)?;
    let regimes = [RegimeSpec {
        name: "all".into(),
        x0: 0,
        y0: 0,
        width: 10,
        height: 10,
        level: 1.0,
        slope: 0.002,
        amplitude: 0.4,
        noise: 0.2,
        exposure: 1.0,
    }];
    let (cube, _) = synth_cube(&grid, 209, &regimes, 9)?;
    let split = chronological_split(209, 52, 0.1)?;

    let lr = fit_lr(&cube, &split, 8, DEFAULT_RIDGE)?;
    println!("LR coefficients (lag 1..8, features, intercept): {:.3?}", lr.coefficients);
    let f = lr.predict_grid(&cube, split.test.clone())?;
    println!("LR test MSE {:.4}", score("lr", &f, &cube, None)?.all_regions.mse);

    let arima = ArimaGrid::fit(&cube, &split, ArimaOrder::default())?;
    let f = arima.predict_grid(&cube, split.test.clone())?;
    println!(
        "ARIMA(1,0,1) test MSE {:.4} ({} fallbacks)",
        score("arima", &f, &cube, None)?.all_regions.mse,
        arima.n_fallbacks()
    );
    Ok(())
}

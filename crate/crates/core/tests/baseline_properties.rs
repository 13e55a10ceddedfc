use crashcast::baselines::{fit_arima, fit_lr, forecast_arima, ArimaGrid, ArimaOrder, DEFAULT_RIDGE};
use crashcast::cube::{chronological_split, GridSpec, SpaceTimeCube};
use proptest::prelude::*;

fn cube_strategy() -> impl Strategy<Value = SpaceTimeCube> {
    (prop::collection::vec(0.0..5.0f64, 6 * 30), prop::collection::vec(0.1..3.0f64, 6))
        .prop_map(|(target, exposure)| {
            let grid = GridSpec::new(3, 2, 1.0, vec![1.0, 0.5, 0.0, 2.0, 1.0, 1.5]).unwrap();
            SpaceTimeCube::new(grid, 30, target)
                .unwrap()
                .with_feature("exposure", exposure)
                .unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Normal equations with ridge: Xᵀ(y − Xβ) = τ·D·β, D zero on the intercept.
    #[test]
    fn lr_residuals_are_orthogonal_to_regressors(cube in cube_strategy(), lags in 1usize..5) {
        let split = chronological_split(30, 5, 0.0).unwrap();
        let m = fit_lr(&cube, &split, lags, DEFAULT_RIDGE).unwrap();
        prop_assert_eq!(m.n_coefficients(), lags + 1 + 1);
        let p = m.n_coefficients();
        let mut xtr = vec![0.0; p];
        for cell in cube.grid().road_cells() {
            for t in lags..split.train.end {
                let row = m.design_row(&cube, cell, t);
                let r = cube.raw(cell, t) - m.linear_prediction(&row);
                for (acc, x) in xtr.iter_mut().zip(&row) {
                    *acc += x * r;
                }
            }
        }
        for (i, v) in xtr.iter().enumerate() {
            let penalty = if i + 1 < p { DEFAULT_RIDGE * m.coefficients[i] } else { 0.0 };
            prop_assert!((v - penalty).abs() < 1e-6, "regressor {}: {} vs {}", i, v, penalty);
        }
    }

    #[test]
    fn lr_forecasts_respect_null_mask_and_clamp(cube in cube_strategy()) {
        let split = chronological_split(30, 5, 0.0).unwrap();
        let m = fit_lr(&cube, &split, 3, DEFAULT_RIDGE).unwrap();
        let f = m.predict_grid(&cube, 25..31).unwrap();
        for t in 25..31 {
            prop_assert!(f.get(2, t).is_nan());
            for c in cube.grid().road_cells() {
                prop_assert!(f.get(c, t) >= 0.0);
            }
        }
    }

    #[test]
    fn white_noise_model_forecasts_mean(s in prop::collection::vec(-10.0..10.0f64, 3..60)) {
        let m = fit_arima(&s, ArimaOrder::new(0, 0, 0)).unwrap();
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        for v in forecast_arima(&m, 4) {
            prop_assert!((v - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn arima_fit_is_finite(s in prop::collection::vec(0.0..5.0f64, 20..60)) {
        let m = fit_arima(&s, ArimaOrder::default()).unwrap();
        prop_assert!(m.sigma2.is_finite());
        prop_assert!(forecast_arima(&m, 3).iter().all(|v| v.is_finite()));
    }

    #[test]
    fn arima_grid_respects_null_mask(cube in cube_strategy()) {
        let split = chronological_split(30, 5, 0.0).unwrap();
        let g = ArimaGrid::fit(&cube, &split, ArimaOrder::new(1, 0, 0)).unwrap();
        let f = g.predict_grid(&cube, 25..30).unwrap();
        for t in 25..30 {
            prop_assert!(f.get(2, t).is_nan());
            prop_assert!(cube.grid().road_cells().all(|c| f.get(c, t) >= 0.0));
        }
    }
}

//! Reference forecasters: pooled ridge regression on lagged EPDO and
//! per-cell ARIMA fitted by conditional sum of squares.

mod arima;
mod linear;
mod nelder_mead;

pub use arima::{fit_arima, forecast_arima, one_step_arima, ArimaGrid, ArimaModel, ArimaOrder};
pub use linear::{fit_lr, LinearModel, DEFAULT_RIDGE};
pub use nelder_mead::{nelder_mead, NelderMeadOptions, NelderMeadResult};

//! Weekly crash-risk forecasting on gridded space-time cubes.
//!
//! The crate is organised around the pipeline it implements:
//!
//! * [`cube`]: grid geometry, crash ingestion, the EPDO target matrix,
//!   chronological splits and seeded synthetic cubes.
//! * [`tensor`]: a small double-precision tensor engine with "same" 2-D
//!   convolution and tape-based reverse-mode differentiation.
//! * [`convlstm`]: the ConvLSTM cell, sequence unrolling, masked loss and the
//!   per-region trainer.
//! * [`ensemble`]: overlapping spatial windows, per-window training and the
//!   weighted combiner that merges window forecasts.
//! * [`baselines`]: pooled ridge regression and per-cell ARIMA.
//! * [`eval`]: MSE/RMSE scoring, cross-K curves, DTW and k-medoids clustering.
//! * [`config`], [`pipeline`] and [`cli`]: the run configuration, shared
//!   pipeline steps and the command-line driver.
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

pub mod archive;
pub mod baselines;
pub mod cli;
pub mod config;
pub mod convlstm;
pub mod cube;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod forecast;
pub mod pipeline;
pub mod tensor;

pub use error::{Error, Result};

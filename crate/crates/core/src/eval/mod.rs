//! Forecast scoring, cross-K spatial correspondence and DTW risk zones.

mod crossk;
mod dtw;
mod metrics;

pub use crossk::{
    cross_k, crossk_evaluate, default_radii, hotspot_points, CrossKCurve, Point,
};
pub use dtw::{cluster_dtw, dtw, ClusterLabels, DEFAULT_MAX_SWAPS};
pub use metrics::{mse, rmse, score, ClusterScore, ErrorStats, EvalReport, ModelScore};

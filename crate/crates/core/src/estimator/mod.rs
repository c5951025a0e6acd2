//! Estimating the error of a reduced adjoint solution from its residual.

pub mod fnn;
pub mod gain;
pub mod metrics;

pub use fnn::{
    fnn_train, train_error_model, ErrorModel, FeedforwardNet, Layer, TrainConfig, TrainingSummary,
};
pub use gain::{gain, GainTable};
pub use metrics::{regression_metrics, true_error_norms, RegressionMetrics};

use crate::error::Result;

/// Anything that predicts per-step error norms of a reduced solution.
pub trait ErrorEstimator {
    fn estimate_errors(&self, density: &[f64], residual_norms: &[f64]) -> Result<Vec<f64>>;
}

//! Generic observer machinery: cascade forms, dynamic extension, filtered
//! linear regressions, gradient estimation, excitation monitoring and the
//! assembled observer.

mod cascade;
pub mod checks;
mod estimator;
mod filter;
mod frobenius;
mod observer;
mod pe;
mod regression;

pub use cascade::{extend, recover_state, Cascade, Dims, ExtensionField, PlantBlock};
pub use estimator::GradientEstimator;
pub use filter::{filter_regression, FilterInit, FilteredRegression, RegressionFilterField};
pub use frobenius::{frobenius_rank_check, RankCheck};
pub use observer::{assemble, EstimatorConfig, EstimatorPath, PeboObserver};
pub use pe::{pe_monitor, PeReport};
pub use regression::{LinearRegression, StaticRegression};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrameworkError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("estimate undefined: {0}")]
    EstimateUndefined(String),
    #[error("estimator diverged: non-finite parameter update")]
    EstimatorDiverged,
    #[error("invalid gain: {0}")]
    InvalidGain(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

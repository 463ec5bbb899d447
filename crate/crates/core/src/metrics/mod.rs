//! Scores for stochastic security: calibration error, relative error, the
//! exponential decay fit over Langevin budgets and its extrapolation to full
//! purification.

mod calibration;
mod trend;

pub use calibration::{calibration_bins, ece, CalibrationBins, DEFAULT_ECE_BINS};
pub use trend::{
    fit_decay, project_full_purification, relative_error, spearman, Projection, TrendFit, REFERENCE_PROJECTION,
};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricsError {
    #[error("input is empty")]
    Empty,
    #[error("{left} values paired with {right} values")]
    LengthMismatch { left: usize, right: usize },
    #[error("confidence at index {index} lies outside [0, 1]")]
    Confidence { index: usize },
    #[error("bin count must be positive")]
    Bins,
    #[error("relative error is undefined for a zero baseline error")]
    ZeroBaseline,
    #[error("error value at index {index} is not positive")]
    NonPositive { index: usize },
    #[error("a trend fit needs at least two distinct budgets")]
    Degenerate,
}

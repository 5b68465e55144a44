//! Ensemble smoother with multiple data assimilation and geometric
//! inflation factors.

mod assimilate;
mod mismatch;
mod schedule;
mod update;

use thiserror::Error;

pub use assimilate::{assimilate, AssimilationOptions, AssimilationOutcome, Parameterization};
pub use mismatch::{mismatch, MismatchReport};
pub use schedule::{choose_alpha1, constant_schedule, geometric_schedule, InflationSchedule, ALPHA_MAX};
pub use update::{esmda_update, gaspari_cohn, Localization, UpdateOptions};

#[derive(Debug, Error)]
pub enum EsmdaError {
    #[error("invalid inflation schedule: {0}")]
    InvalidSchedule(String),
    #[error("ensemble needs at least two members, got {0}")]
    TooFewMembers(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("inflation factor must be >= 1, got {0}")]
    InvalidAlpha(f64),
    #[error(transparent)]
    Observations(#[from] crate::observations::ObservationError),
    #[error("{failed} of {total} forward runs failed in round {round} (limit {limit}); last error: {last}")]
    TooManyFailures { round: usize, failed: usize, total: usize, limit: usize, last: String },
    #[error(transparent)]
    Geomodel(#[from] crate::geomodel::GeomodelError),
}

pub type Result<T> = std::result::Result<T, EsmdaError>;

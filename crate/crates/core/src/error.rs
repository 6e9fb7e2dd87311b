use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the simulation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates its documented constraint.
    #[error("invalid `{field}`: {constraint}")]
    InvalidParameter { field: String, constraint: String },

    #[error("unable to parse scenario: {0}")]
    Scenario(String),

    #[error("aliasing risk: reduce dz or enlarge grid (sampling factor {factor:.3} < {minimum})")]
    Aliasing { factor: f64, minimum: f64 },

    #[error("wander exceeds grid margin ({displacement:.4} m > {limit:.4} m)")]
    WanderMargin { displacement: f64, limit: f64 },

    #[error("empty field")]
    EmptyField,

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("airmass model invalid for zenith {zenith_deg:.2} deg (must be below 80 deg)")]
    AirmassInvalid { zenith_deg: f64 },

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("{path}:{line}: {message}")]
    Table {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("output validation failed: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, constraint: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            constraint: constraint.into(),
        }
    }

    /// True for failures raised by a numerical guard during propagation, as opposed to
    /// bad input or I/O.
    pub fn is_numerical_guard(&self) -> bool {
        matches!(
            self,
            Error::Aliasing { .. }
                | Error::WanderMargin { .. }
                | Error::EmptyField
                | Error::Validation(_)
        )
    }

    /// True for errors caused by the scenario or its referenced input files.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::Scenario(_)
                | Error::AirmassInvalid { .. }
                | Error::Table { .. }
                | Error::GridMismatch(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("matrix is not positive definite: eigenvalue {value:e} at index {index}")]
    IndefiniteMatrix { index: usize, value: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid grouping: boundary after group {group} has ratio {ratio} (needs < 1)")]
    InvalidGrouping { group: usize, ratio: f64 },

    #[error("schedule infeasible at (i={i}, j={j}): {reason}")]
    ScheduleInfeasible { i: usize, j: usize, reason: String },

    #[error("degenerate spectrum at (i={i}, j={j}): |r_i - R| vanishes")]
    DegenerateSpectrum { i: usize, j: usize },

    #[error("contraction bound invalid: factor {factor} for group {group} outside (0, 1)")]
    BoundInvalid { group: usize, factor: f64 },

    #[error("iterate diverged at step {step}")]
    Divergence { step: usize },

    #[error("numerical breakdown at step {step}: {reason}")]
    NumericalBreakdown { step: usize, reason: String },

    #[error("rank-deficient system: {0} (use N >= d samples)")]
    RankDeficient(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors that come from numerics rather than bad input or I/O.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::IndefiniteMatrix { .. }
                | Error::ScheduleInfeasible { .. }
                | Error::DegenerateSpectrum { .. }
                | Error::BoundInvalid { .. }
                | Error::Divergence { .. }
                | Error::NumericalBreakdown { .. }
                | Error::RankDeficient(_)
                | Error::DegenerateData(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

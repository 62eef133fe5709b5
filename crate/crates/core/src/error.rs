use thiserror::Error;

pub type Result<T, E = HoiError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum HoiError {
    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("column {column} is constant (zero variance)")]
    DegenerateColumn { column: usize },

    #[error("insufficient samples: need more than {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("matrix is not positive definite (batch row {row}, dataset {dataset})")]
    NotPositiveDefinite { row: usize, dataset: usize },

    #[error("invalid order range {min}..={max} for {n} variables")]
    InvalidOrderRange { n: usize, min: usize, max: usize },

    #[error("invalid n-plet: {0}")]
    InvalidNplet(String),

    #[error("exhaustive scan over {n} variables exceeds the limit of {limit}; use greedy or anneal instead")]
    ExhaustiveLimitExceeded { n: usize, limit: usize },

    #[error("paired effect size is undefined: differences have zero spread")]
    DegenerateEffectSize,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("reducer failed: {0}")]
    Reducer(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl HoiError {
    /// True for errors caused by bad input or configuration, as opposed to
    /// failures that happen while computing.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            HoiError::InvalidData(_)
                | HoiError::DegenerateColumn { .. }
                | HoiError::InsufficientSamples { .. }
                | HoiError::InvalidOrderRange { .. }
                | HoiError::InvalidNplet(_)
                | HoiError::ExhaustiveLimitExceeded { .. }
                | HoiError::InvalidConfig(_)
                | HoiError::Io(_)
                | HoiError::Csv(_)
                | HoiError::Json(_)
        )
    }
}

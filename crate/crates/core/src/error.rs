use thiserror::Error;

/// Errors produced by scoring, model fitting, attribution and simulation.
#[derive(Debug, Error)]
pub enum RcaError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("graph contains a cycle through node '{node}'")]
    CyclicGraph { node: String },

    #[error("schema error: {0}")]
    SchemaError(String),

    #[error("unknown node '{0}'")]
    UnknownNode(String),

    #[error("degenerate noise at node '{node}': std {std:e} below tolerance")]
    DegenerateNoise { node: String, std: f64 },

    #[error(
        "{players} players exceed the exact Shapley limit of {limit}; use permutation sampling"
    )]
    TooManySubsets { players: usize, limit: usize },

    #[error("AUC undefined: labels contain a single class")]
    UndefinedAuc,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl RcaError {
    /// Stable short code, used by the CLI as an error prefix.
    pub fn code(&self) -> &'static str {
        match self {
            RcaError::InvalidInput(_) => "invalid-input",
            RcaError::DomainError(_) => "domain",
            RcaError::CyclicGraph { .. } => "cyclic-graph",
            RcaError::SchemaError(_) => "schema",
            RcaError::UnknownNode(_) => "unknown-node",
            RcaError::DegenerateNoise { .. } => "degenerate-noise",
            RcaError::TooManySubsets { .. } => "too-many-subsets",
            RcaError::UndefinedAuc => "undefined-auc",
            RcaError::Io(_) => "io",
            RcaError::Json(_) => "json",
            RcaError::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, RcaError>;

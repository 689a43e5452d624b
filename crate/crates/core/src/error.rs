use thiserror::Error;

/// Errors raised anywhere in the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate split: {0}")]
    DegenerateSplit(String),

    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    #[error("index {index} out of bounds for {len} samples")]
    Bounds { index: usize, len: usize },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("singular system (condition estimate {condition:.3e}): {context}")]
    Numerical { context: String, condition: f64 },

    #[error("average precision undefined: no relevant items")]
    UndefinedAp,

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("hypothesis {index}: {source}")]
    Hypothesis {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("method {method}: {source}")]
    Method {
        method: String,
        #[source]
        source: Box<Error>,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Strips `Method`/`Hypothesis` annotations and returns the root cause.
    pub fn root(&self) -> &Error {
        match self {
            Error::Method { source, .. } | Error::Hypothesis { source, .. } => source.root(),
            other => other,
        }
    }

    pub(crate) fn in_method(self, method: impl Into<String>) -> Error {
        Error::Method {
            method: method.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

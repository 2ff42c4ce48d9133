use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The predicate polytope of a star has no feasible point.
    #[error("empty set: {0}")]
    EmptySet(String),

    #[error("unbounded linear program: {0}")]
    Unbounded(String),

    #[error("input too short: {0}")]
    InputTooShort(String),

    #[error("layer {layer}: {message}")]
    Shape { layer: usize, message: String },

    #[error("layer {layer}: unsupported layer kind {kind:?}")]
    UnsupportedLayer { layer: usize, kind: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("missing column {0:?}")]
    MissingColumn(String),

    #[error("non-numeric cell at data row {row}, column {column:?}: {value:?}")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("feature {0:?} has zero standard deviation; screen constant features before normalizing")]
    ZeroStd(String),

    #[error("dimension cap exceeded: {0}")]
    DimensionCap(String),

    #[error("simplex solver: {0}")]
    Solver(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("window {index}: {source}")]
    Window {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn in_window(self, index: usize) -> Self {
        Error::Window {
            index,
            source: Box::new(self),
        }
    }
}

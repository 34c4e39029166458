use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parity mismatch: all vertices must lie on the same side of the bipartition")]
    ParityMismatch,

    #[error("set is not in canonical position: {0}")]
    NotCanonical(String),

    #[error("{what} = {value} exceeds the supported maximum {max}")]
    TooLarge {
        what: &'static str,
        value: usize,
        max: usize,
    },

    #[error("argument out of range: {0}")]
    OutOfRange(String),

    /// The request is well-formed but beyond what the exact engines can do
    /// (for instance an exact partition function above d = 6).
    #[error("capability exceeded: {0}")]
    Capability(String),

    #[error("floating-point overflow while evaluating {0}; retry with an exact rational fugacity")]
    Overflow(String),

    #[error("insufficient samples: got {got}, need at least {need}")]
    InsufficientSamples { got: usize, need: usize },

    #[error("cannot parse {0}")]
    Parse(String),

    #[error("cache error: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Capability(_) => 3,
            Error::Io(_) | Error::Cache(_) | Error::Json(_) | Error::Csv(_) => 1,
            _ => 2,
        }
    }
}

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("singular design: predictor matrix is rank deficient")]
    SingularDesign,

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("degenerate variance: input is constant")]
    DegenerateVariance,

    #[error("degenerate conditioning: conditioning variable is perfectly correlated with an argument")]
    DegenerateConditioning,

    #[error("context class {label} has {size} member(s), at least 2 required")]
    InsufficientContext { label: u32, size: usize },

    #[error("no eligible predictor: every column is constant")]
    NoEligiblePredictor,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("duplicate gene name `{0}`")]
    DuplicateGene(String),

    #[error("duplicate intervention target `{0}`")]
    DuplicateTarget(String),

    #[error("{failed} of {runs} subsample runs failed (more than 10%)")]
    TooManyFailures { failed: usize, runs: usize },

    #[error("metadata mismatch: {0}")]
    Metadata(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("2D distance {d2d:.3} m outside the model range [{min}, {max}] m")]
    DistanceOutOfRange { d2d: f64, min: f64, max: f64 },

    #[error("cell load must be at least 1")]
    ZeroLoad,

    #[error("invalid SINR interval [{lo}, {hi}] dB")]
    InvalidInterval { lo: f64, hi: f64 },

    #[error("regression needs at least two distinct SINR values")]
    DegenerateFit,

    #[error("fitted slope {0} is not positive")]
    NonIncreasingFit(f64),

    #[error("invalid MCS table: {0}")]
    InvalidMcsTable(String),

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid association: {0}")]
    Association(String),

    #[error("scenario has no UEs")]
    EmptyScenario,

    #[error("need at least {needed} UEs, found {found}")]
    TooFewUes { needed: usize, found: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("degenerate sweep segment: {0}")]
    DegenerateSegment(String),

    #[error("no samples")]
    EmptySamples,

    #[error("{context}: {message}")]
    Parse { context: String, message: String },

    #[error("schema version {found} not supported (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn parse(context: impl Into<String>, err: serde_json::Error) -> Self {
        Error::Parse {
            context: context.into(),
            message: err.to_string(),
        }
    }
}

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("matrix has non-finite entries")]
    NonFinite,

    #[error("not a valid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("state is not normalized (squared norm {0})")]
    NotNormalized(f64),

    #[error("state has zero norm")]
    ZeroNorm,

    #[error("weight out of range: {0}")]
    WeightOutOfRange(String),

    #[error("Kraus set is not a valid channel: {0}")]
    InvalidChannel(String),

    #[error("p = {p} is not representable; nearest representable values are {lower} and {upper}")]
    NotRepresentable { p: f64, lower: f64, upper: f64 },

    #[error("state is not supported on the anti-correlated pairs only")]
    NotAntiCorrelated,

    #[error("no jump is possible from the ground state")]
    GroundState,

    #[error("time step too large: rate*dim*dt = {value} exceeds {bound}")]
    StepTooLarge { value: f64, bound: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate fit: {0}")]
    Degenerate(String),

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}

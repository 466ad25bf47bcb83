use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("matrix is not unitary: max |(U†U - I)_jk| = {max_deviation:e}")]
    NonUnitary { max_deviation: f64 },

    #[error("size {size} exceeds the limit of {limit}")]
    SizeExceeded { size: usize, limit: usize },

    #[error("photon number not conserved: {input} in, {output} out")]
    ConservationViolation { input: usize, output: usize },

    #[error("invalid probability {value} at mode {mode}")]
    InvalidProbability { mode: usize, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("p_max = 1: the odds ratio R is undefined")]
    PMaxOne,

    #[error("numeric integrity failure: {0}")]
    NumericIntegrity(String),
}

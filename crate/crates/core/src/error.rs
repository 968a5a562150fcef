use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid bandwidth {0}: must be finite and > 0")]
    InvalidBandwidth(f64),
    #[error("sample too small: n = {0}, need at least 2")]
    SampleTooSmall(usize),
    #[error("sample contains a non-finite value at index {0}")]
    NonFinite(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("grid infeasible: {0}")]
    GridInfeasible(String),
    #[error("bandwidth {h} outside grid range [{lo}, {hi}]")]
    OutsideGrid { h: f64, lo: f64, hi: f64 },
    #[error("quadrature did not converge (estimate {value}, error {error})")]
    Quadrature { value: f64, error: f64 },
    #[error("moment of order {0} diverges")]
    DivergentMoment(f64),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid time function `{name}`: {reason}")]
    InvalidTimeFunction { name: String, reason: String },

    #[error("invalid window scan: {0}")]
    InvalidWindow(String),

    #[error("incidence argument outside domain: x={x}, n={n}, z={z} (cap {cap})")]
    OutOfDomain { x: f64, n: f64, z: f64, cap: f64 },

    #[error("z-slope extrapolation did not converge at x={x}, n={n}: estimates {first} and {second}")]
    SlopeNonConvergence {
        x: f64,
        n: f64,
        first: f64,
        second: f64,
    },

    #[error("invalid incidence: {0}")]
    InvalidIncidence(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("integration failed at t={t}: {reason}")]
    Integration { t: f64, reason: String },

    #[error("not applicable: {0}")]
    NotApplicable(String),
}

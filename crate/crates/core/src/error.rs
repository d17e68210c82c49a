use thiserror::Error;

/// Errors raised anywhere in the model, solver and simulation pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("fuel-cell current must be positive, got {current} A")]
    NonPositiveCurrent { current: f64 },

    #[error("voltage {voltage} V outside invertible range ({low} V, {high} V)")]
    VoltageOutOfRange { voltage: f64, low: f64, high: f64 },

    #[error("{what} did not converge within {iterations} iterations")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
    },

    #[error("regressor matrix is numerically singular")]
    RankDeficient,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no assignable equilibrium for output voltage {x3_star} V with fuel-cell voltage in [{low} V, {high} V]")]
    InfeasibleSetpoint { x3_star: f64, low: f64, high: f64 },

    #[error("integration failed at t = {time} s: {reason}")]
    Integration { time: f64, reason: String },

    #[error("inconsistent result: {0}")]
    Inconsistent(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Short category name for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) | Error::InvalidParameter(_) => "config",
            Error::Io(_) => "io",
            Error::InfeasibleSetpoint { .. } => "infeasible",
            _ => "numeric",
        }
    }

    /// Simulation time of the failure, when there is one.
    pub fn time(&self) -> Option<f64> {
        match self {
            Error::Integration { time, .. } => Some(*time),
            _ => None,
        }
    }

    /// Process exit status for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidParameter(_) | Error::Io(_) => 2,
            Error::InfeasibleSetpoint { .. } => 4,
            _ => 3,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

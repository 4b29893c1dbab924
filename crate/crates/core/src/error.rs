use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("zero-frequency contribution requires σ > 0")]
    ZeroModeRequiresSigma,

    #[error("Courant violation: dt = {dt} exceeds the stability limit {limit}")]
    Courant { dt: f64, limit: f64 },

    #[error("non-decaying run: tail ratio {ratio:.3e} after {steps} steps exceeds tolerance {tol:.1e}")]
    NonDecayingRun { steps: usize, ratio: f64, tol: f64 },

    #[error("time step mismatch between trace ({trace}) and weight ({weight})")]
    DtMismatch { trace: f64, weight: f64 },

    #[error("weight window ({weight} samples) shorter than trace window ({trace} samples)")]
    WindowMismatch { trace: usize, weight: usize },

    #[error("linear solve failed: {0}")]
    Solver(String),

    #[error("Matsubara sum not converged after {n_max} terms")]
    MatsubaraNotConverged { n_max: usize },

    #[error("config line {line}: {msg}")]
    ConfigSyntax { line: usize, msg: String },

    #[error("config line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },

    #[error("config: {0}")]
    ConfigValidation(String),

    #[error("csv line {line}: {msg}")]
    Csv { line: usize, msg: String },

    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    /// True for errors caused by bad input rather than a failed computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Geometry(_)
                | Error::Parameter(_)
                | Error::ZeroModeRequiresSigma
                | Error::Courant { .. }
                | Error::ConfigSyntax { .. }
                | Error::UnknownKey { .. }
                | Error::ConfigValidation(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

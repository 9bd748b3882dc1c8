use thiserror::Error;

/// Errors from every stage of the pipeline.
///
/// The CLI maps [`Error::Validation`] and [`Error::Io`] to exit code 2 and the
/// solver variants to exit code 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation: {0}")]
    Validation(String),
    #[error("insufficient resolution: {0}")]
    InsufficientResolution(String),
    #[error("Dirichlet eigenvalue proximity: smallest eigenvalue {0:.3e}")]
    DirichletProximity(f64),
    #[error("LS non-convergence after {iterations} iterations, residual {residual:.3e}")]
    LsNonConvergence { iterations: usize, residual: f64, history: Vec<f64> },
    #[error("dbar solve failed after {iterations} iterations, residual {residual:.3e}")]
    DbarFailed { iterations: usize, residual: f64, history: Vec<f64> },
    #[error("solver: {0}")]
    Solver(String),
    #[error("resonant node: symbol vanishes within guard distance")]
    ResonantNode,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::InsufficientResolution(_) | Error::Io(_) | Error::Parse(_) => 2,
            _ => 3,
        }
    }
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Validation(msg.into()))
}

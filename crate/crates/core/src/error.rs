use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("non-integrable weight d^{beta}: exponent must exceed -1")]
    Singularity { beta: f64 },

    #[error("positivity violated at node {node}: value {value:e}")]
    Positivity { node: usize, value: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error(
        "Newton stagnated after {iterations} iterations (eps stage {stage}, residual {residual:e})"
    )]
    Convergence {
        iterations: usize,
        stage: usize,
        residual: f64,
        last_iterate: Vec<f64>,
    },

    #[error("pure Neumann problem is incompatible: load integrates to {integral:e}")]
    Compatibility { integral: f64 },

    #[error("outer block iteration did not converge in {iterations} sweeps (last change {change:e})")]
    OuterConvergence { iterations: usize, change: f64 },

    #[error("parameter selection exhausted the caps: {last_failure}")]
    Selection { last_failure: String },

    #[error("grid mismatch between grid functions")]
    GridMismatch,

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit status used by the command line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Singularity { .. }
            | Error::Precondition(_)
            | Error::GridMismatch => 4,
            Error::Io(_) => 4,
            Error::Positivity { .. }
            | Error::Convergence { .. }
            | Error::Compatibility { .. }
            | Error::OuterConvergence { .. }
            | Error::Selection { .. } => 3,
        }
    }
}

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

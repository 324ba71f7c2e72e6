use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// The caller supplied data that violates a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("quadrature did not reach tolerance after {subdivisions} subdivisions (estimate {estimate:e}, error {error:e})")]
    Quadrature {
        subdivisions: usize,
        estimate: f64,
        error: f64,
    },

    #[error("newton iteration failed after {iterations} iterations: {reason} (residual {residual:e})")]
    Newton {
        iterations: usize,
        residual: f64,
        reason: String,
    },

    #[error("linear solver stagnated after {iterations} iterations (relative residual {relative_residual:e})")]
    LinearStagnation {
        iterations: usize,
        relative_residual: f64,
    },

    #[error("discrete Kähler positivity lost at t = {t}: minimum form density {margin:e}")]
    PositivityLoss { t: f64, margin: f64 },

    #[error("forbidden set separates node {from} from node {to}")]
    Separated { from: usize, to: usize },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for failures of a numerical method, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        !matches!(self, Error::InvalidInput(_))
    }
}

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// An input value violated a precondition (non-finite, negative, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Inconsistent dimensions between a state and the network description.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A parameter combination makes the requested quantity undefined.
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    /// A parameter combination degenerates a closed-form expression.
    #[error("degenerate parameters: {0}")]
    DegenerateParameters(String),

    /// An integration step drove a compartment below the clamp tolerance.
    #[error(
        "step size too large: component {component} reached {value:.6e} at t = {t}; \
         retry with a smaller step"
    )]
    StepTooLarge {
        component: &'static str,
        value: f64,
        t: f64,
    },

    /// The integrated state stopped being finite.
    #[error("divergence: non-finite state at t = {t}")]
    Divergence { t: f64 },

    /// An iterative solver ran out of iterations.
    #[error("no convergence after {iterations} iterations (last residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    /// Every fit start failed to produce a usable optimum.
    #[error("fit failed: {0}")]
    FitFailed(String),

    /// e_rel is undefined because the predicted series has zero norm.
    #[error("relative error undefined: predicted series has zero norm (mae = {mae})")]
    UndefinedRelativeError { mae: f64 },

    /// A configuration file failed to parse.
    #[error("{path}: parse error at line {line}, column {column}: {message}")]
    ConfigParse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    /// A configuration value violated an invariant.
    #[error("invalid config: {0}")]
    ConfigInvalid(String),

    /// A CSV series file failed to parse or validate.
    #[error("{path}: line {line}: {message}")]
    SeriesParse {
        path: String,
        line: usize,
        message: String,
    },

    /// A file read or write failed.
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

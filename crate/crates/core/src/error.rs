use thiserror::Error;

/// Failures raised by the model, mesh and solver layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("rho(0) = 1 gives a zero default domain length; pass an explicit L")]
    ExplicitLengthRequired,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("time-to-maturity {tau} is outside [0, T) with T = {maturity}")]
    TauOutOfRange { tau: f64, maturity: f64 },

    #[error("zero pivot in tridiagonal elimination at row {index}")]
    ZeroPivot { index: usize },

    #[error("predictor residual has no sign change in [{lower}, {upper}]")]
    NoBracket { lower: f64, upper: f64 },

    #[error("no convergence after {iterations} iterations (last step {last_step:e})")]
    NoConvergence { iterations: usize, last_step: f64 },

    #[error("singular Schur complement {value:e}")]
    SingularSchur { value: f64 },

    #[error("free boundary ratio became non-positive ({value})")]
    NonPositiveZ { value: f64 },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("layer {layer} does not exist (result has {available} layers)")]
    MissingLayer { layer: usize, available: usize },

    #[error("time layer {layer}: {source}")]
    AtLayer {
        layer: usize,
        #[source]
        source: Box<SolverError>,
    },

    #[error("refinement level N = {n}: {source}")]
    AtLevel {
        n: usize,
        #[source]
        source: Box<SolverError>,
    },
}

impl SolverError {
    pub(crate) fn at_layer(self, layer: usize) -> Self {
        SolverError::AtLayer {
            layer,
            source: Box::new(self),
        }
    }

    /// Index of the failing time layer, if the error carries one.
    pub fn layer(&self) -> Option<usize> {
        match self {
            SolverError::AtLayer { layer, .. } => Some(*layer),
            SolverError::AtLevel { source, .. } => source.layer(),
            _ => None,
        }
    }
}

pub type SolverResult<T> = Result<T, SolverError>;

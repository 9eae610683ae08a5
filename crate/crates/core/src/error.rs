use thiserror::Error;

/// Errors raised by the geometry, modulus and representation routines.
#[derive(Error, Debug)]
pub enum ModspaceError {
    #[error("vertices {0} and {1} lie in different components")]
    Disconnected(usize, usize),
    #[error("every sampled ball carries zero measure")]
    EmptyBall,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("mesh too coarse: {0}")]
    MeshTooCoarse(String),
    #[error("density is missing a value for edge {0}")]
    MissingEdgeDensity(usize),
    #[error("domain point {0} has no neighbour")]
    IsolatedPoint(usize),
    #[error("no path connects the source set to the sink set")]
    NoPath,
    #[error("curve has zero length")]
    ZeroLength,
    #[error("curve family is empty")]
    EmptyFamily,
    #[error(
        "solver did not converge after {iterations} iterations \
         (lower bound {lower}, upper bound {upper})"
    )]
    Nonconvergence {
        iterations: usize,
        lower: f64,
        upper: f64,
    },
    #[error("instance too large for brute force: {0}")]
    TooLarge(String),
    #[error("fragment has {0} domain points, at least 3 are required")]
    TooFewPoints(usize),
    #[error("graph was not produced by the expected generator: {0}")]
    WrongGenerator(String),
    #[error("direction hypothesis violated on a fraction {0} of sampled points")]
    DirectionViolation(f64),
    #[error("directions are linearly dependent")]
    DependentDirections,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, ModspaceError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(ModspaceError::InvalidInput(msg.into()))
}

use thiserror::Error;

/// Every failure the library can report.
///
/// Variants are grouped by the module that raises them; the CLI maps them
/// onto exit codes via [`Error::is_numerical_abort`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    // models
    #[error("unknown model family `{0}`")]
    UnknownFamily(String),
    #[error("Bessel alpha must satisfy alpha >= 1, got {0}")]
    AlphaOutOfRange(f64),
    #[error("Riesz exponent a = {a_exp} must exceed dimension d = {dim}")]
    RieszExponentInvalid { a_exp: i64, dim: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("point outside kernel domain: {0}")]
    DomainError(String),
    #[error("two points coincide (distance {distance:e}) at indices {i} and {j}")]
    SingularOverlap { i: usize, j: usize, distance: f64 },
    #[error("duplicate points at indices {i} and {j}")]
    DuplicatePoint { i: usize, j: usize },
    #[error("point {index} lies outside the window")]
    OutsideWindow { index: usize },

    // pointfields
    #[error("discretized kernel is not positive semi-definite (eigenvalue {eigenvalue:e})")]
    EigenFailure { eigenvalue: f64 },
    #[error("proposed state has non-finite energy change")]
    NonFinitePotential,
    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("test function support violates the window margin: {0}")]
    SupportViolation(String),
    #[error("configurations differ outside S_r: {0}")]
    OutsideMismatch(String),
    #[error("unsupported binning: {0}")]
    UnsupportedBins(String),

    // drift
    #[error("evaluation point coincides with configuration point {index}")]
    SelfPointUnresolved { index: usize },
    #[error("evaluation point {0} is not in the open half-line")]
    BoundaryViolation(f64),
    #[error("invalid shell schedule: {0}")]
    InvalidSchedule(String),

    // sde
    #[error("step collapse at t = {t}: particles {i} and {j} at distance {gap:e}")]
    StepCollapse { t: f64, i: usize, j: usize, gap: f64 },
    #[error("particle {particle} reached the boundary at t = {t}")]
    BoundaryHit { t: f64, particle: usize },
    #[error("precondition violated: {0}")]
    Precondition(String),

    // analysis
    #[error("quadrature failed to converge: {0}")]
    QuadratureFailure(String),

    // io
    #[error("io error: {0}")]
    Io(String),
    #[error("malformed data: {0}")]
    Format(String),
}

impl Error {
    /// `true` for failures of the time integrator (as opposed to bad input).
    pub fn is_numerical_abort(&self) -> bool {
        matches!(self, Error::StepCollapse { .. } | Error::BoundaryHit { .. })
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

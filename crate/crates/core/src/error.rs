use alloc::string::String;

/// Errors raised by the analysis routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("tensor is not cubical")]
    NotCubical,

    #[error("tensor is not symmetric: entry deviates by {deviation:e} from its permutation average")]
    NotSymmetric { deviation: f64 },

    #[error("equation {equation}: monomial of degree {found}, expected {expected}")]
    DegreeMismatch {
        equation: usize,
        expected: usize,
        found: usize,
    },

    #[error("equation {equation}: duplicate exponent vector")]
    DuplicateMonomial { equation: usize },

    #[error("unsupported tensor order {order}: {reason}")]
    UnsupportedOrder { order: usize, reason: &'static str },

    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),

    #[error("orthogonal decomposition failed; best residual {best_residual:e}")]
    DecompositionFailed { best_residual: f64 },

    #[error("tensor is not odeco: residual {residual:e} exceeds {tolerance:e}; try the transform module")]
    NotOdeco { residual: f64, tolerance: f64 },

    #[error("time {t} lies outside the solution domain [0, {domain_end})")]
    DomainViolation { t: f64, domain_end: f64 },

    #[error("hypergeometric argument z = {z} is on the branch cut [1, inf)")]
    BranchPoint { z: f64 },

    #[error("integration path crosses the equilibrium at {at}")]
    PathCrossesEquilibrium { at: f64 },

    #[error("mode {mode} escapes in finite time (estimated at t = {escape_time})")]
    ModalBlowUp { mode: usize, escape_time: f64 },

    #[error("mode {mode} has no real equilibrium")]
    NoRealEquilibrium { mode: usize },

    #[error("quadrature did not reach the requested tolerance (error estimate {estimate:e})")]
    QuadratureFailed { estimate: f64 },

    #[error("root bracketing failed")]
    BracketFailed,

    #[error("structured CP fit failed on every restart; best error {best_error:e}")]
    FitFailed { best_error: f64 },

    #[error("system is not transformable to an odeco system at this budget (fit error {fit_error:e}, threshold {threshold:e})")]
    NotTransformable { fit_error: f64, threshold: f64 },

    #[error("matrix is not orthogonal (deviation {deviation:e})")]
    NotOrthogonal { deviation: f64 },

    #[error("matrix is numerically singular")]
    Singular,
}

pub type Result<T> = core::result::Result<T, Error>;

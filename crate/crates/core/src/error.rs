use thiserror::Error;

/// Errors produced by the macrostate library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix has non-finite entries")]
    NonFinite,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not Hermitian (asymmetry {0:.3e})")]
    NotHermitian(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPsd(f64),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("invalid stochastic map: {0}")]
    InvalidStochasticMap(String),

    #[error("map is not completely positive (min Choi eigenvalue {0:.3e})")]
    NotCompletelyPositive(f64),

    #[error("map is not trace preserving (error {0:.3e})")]
    NotTracePreserving(f64),

    #[error("Choi and superoperator representations disagree (error {0:.3e})")]
    InconsistentRepresentation(f64),

    #[error("channel output is not a state (min eigenvalue {0:.3e})")]
    InvalidOutput(f64),

    #[error("prior is not invertible (min eigenvalue {0:.3e})")]
    PriorNotInvertible(f64),

    #[error("image of the prior is not invertible (min eigenvalue {0:.3e})")]
    ImageNotInvertible(f64),

    #[error("marginal state is not invertible (min eigenvalue {0:.3e})")]
    MarginalNotInvertible(f64),

    #[error("difference of two infinite divergences is indeterminate")]
    IndeterminateDifference,

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("too many outcomes for exhaustive enumeration: {0} (limit {1})")]
    TooManyOutcomes(usize, usize),

    #[error("frame invariant violated: {0}")]
    FrameInvariant(String),

    #[error("equivalent conditions disagree: {0}")]
    TheoremViolation(String),

    #[error("maximal projective post-processing is not trivial ({0} blocks)")]
    MpppNotTrivial(usize),

    #[error("unitaries do not form a group representation: {0}")]
    NotARepresentation(String),

    #[error("representation has nontrivial multiplicities (commutant dimension {commutant}, {irreps} isotypic blocks)")]
    NontrivialMultiplicity { commutant: usize, irreps: usize },

    #[error("prior is not a product state (distance to product of marginals {0:.3e})")]
    NonProductPrior(f64),

    #[error("fixed-point analysis inconsistent: {0}")]
    FixedPointMismatch(String),

    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
}

/// Coarse classification used for CLI exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Schema,
    Precondition,
    TheoremViolation,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Schema { .. } => ErrorKind::Schema,
            Error::TheoremViolation(_) | Error::FixedPointMismatch(_) | Error::FrameInvariant(_) => {
                ErrorKind::TheoremViolation
            }
            _ => ErrorKind::Precondition,
        }
    }

    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

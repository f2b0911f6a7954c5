use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("site {site} out of range 1..={sites}")]
    SiteOutOfRange { site: usize, sites: usize },

    #[error("invalid site list: {0}")]
    InvalidSites(String),

    #[error("invalid hamiltonian spec: {0}")]
    InvalidSpec(String),

    #[error("coefficient array has shape {rows}x{cols}, expected {expected_rows}x4")]
    CoefficientShape {
        rows: usize,
        cols: usize,
        expected_rows: usize,
    },

    #[error("symmetry does not commute with the hamiltonian (commutator max-norm {norm:.3e})")]
    NonCommuting { norm: f64 },

    #[error("symmetry operators do not commute with each other (commutator max-norm {norm:.3e})")]
    SymmetriesNonCommuting { norm: f64 },

    #[error("dense dimension {dim} exceeds the limit {limit}")]
    DimensionLimit { dim: usize, limit: usize },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("not enough levels: {available} available, {required} required")]
    InsufficientLevels { available: usize, required: usize },

    #[error("ill-conditioned unfolding fit (condition estimate {condition:.3e}); reduce the degree")]
    IllConditionedFit { condition: f64 },

    #[error("unsupported surmise index beta = {0} (expected 1, 2 or 4)")]
    UnsupportedBeta(u32),

    #[error("empty microcanonical window [{e_min}, {e_max}]")]
    EmptyWindow { e_min: f64, e_max: f64 },

    #[error("target energy {target} outside the open spectral interval ({e_min}, {e_max})")]
    TargetOutOfRange { target: f64, e_min: f64, e_max: f64 },

    #[error("target (E = {energy}, Q = {charge}) is not attainable: {reason}")]
    TargetNotAttainable {
        energy: f64,
        charge: f64,
        reason: String,
    },

    #[error("singular covariance matrix (determinant {determinant:.3e})")]
    SingularJacobian { determinant: f64 },

    #[error("solver did not converge: {0}")]
    NoConvergence(String),

    #[error("state is not normalized (norm {norm})")]
    Unnormalized { norm: f64 },

    #[error("rejection sampling exhausted {attempts} attempts (accepted {accepted})")]
    RejectionCap { attempts: u64, accepted: u64 },

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("operation requires a qutrit system")]
    NotQutrit,

    #[error("dimension {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("scaling fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),

    #[error("non-positive value {0} under log scale")]
    NonPositive(f64),

    #[error("operator expression error: {0}")]
    Selector(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Selector(_) | Error::InvalidSpec(_) => 2,
            _ => 1,
        }
    }
}

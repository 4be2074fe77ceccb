use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty profile")]
    EmptyProfile,

    #[error("{what} index {index} out of range (size {size})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("KL undefined: v({index}) = 0 where u({index}) > 0")]
    KlUndefined { index: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("horizon mismatch: expected {expected}, got {got}")]
    HorizonMismatch { expected: usize, got: usize },

    #[error("arity too large for brute force: {0} > 8")]
    ArityTooLarge(usize),

    #[error("function not symmetric: permutation changed the value at trial {trial}")]
    NotSymmetric { trial: usize },

    #[error(
        "modulus violation: L = {lipschitz} below grid modulus {modulus} (witness grid points {} and {})",
        witness.0,
        witness.1
    )]
    ModulusViolation {
        lipschitz: f64,
        modulus: f64,
        witness: (usize, usize),
    },

    #[error("support collapsed: policy entry {index} is zero")]
    SupportCollapsed { index: usize },

    #[error(
        "congestion curve not non-increasing: agent {agent}, state {state}, action {action}, between counts {count} and {}",
        count + 1
    )]
    NonMonotoneCurve {
        agent: usize,
        state: usize,
        action: usize,
        count: usize,
    },

    #[error("enumeration of {count} profiles exceeds cap {cap}; use sampled mode")]
    EnumerationTooLarge { count: u128, cap: u128 },

    #[error("no extension available: {0}")]
    NoExtension(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

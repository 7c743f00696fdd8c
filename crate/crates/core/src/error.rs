use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("1/{param} = {reciprocal} is not an integer")]
    NonIntegerReciprocal { param: &'static str, reciprocal: f64 },

    #[error("domain mismatch: expected {expected} points, got {actual}")]
    DomainMismatch { expected: usize, actual: usize },

    #[error("{name} = {value} is out of range: {reason}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("concept class is empty")]
    EmptyClass,

    #[error("duplicate concept id {0}")]
    DuplicateId(u64),

    #[error("concept id {0} not found in class")]
    UnknownConcept(u64),

    #[error("concept {id} has value {value} outside [0, 1]")]
    ValueOutOfRange { id: u64, value: f64 },

    #[error("distribution is invalid: {0}")]
    InvalidDistribution(String),

    #[error("subset is empty")]
    EmptySubset,

    #[error("surviving set is empty")]
    EmptySurvivingSet,

    #[error("input too large: {0}")]
    TooLarge(String),

    #[error("class is not Boolean-valued (concept {id} takes value {value})")]
    NotBoolean { id: u64, value: f64 },

    #[error("invalid feedback at round {round}: {reason}")]
    InvalidFeedback { round: usize, reason: String },

    #[error("adversary tree exhausted: already committed to a target")]
    TreeExhausted,

    #[error("invalid shatter tree: {0}")]
    InvalidTree(String),

    #[error("tree depth {depth} is smaller than instance length {d}")]
    DepthMismatch { depth: usize, d: usize },

    #[error("samples are not neighbours: {0}")]
    NotNeighbors(String),

    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("matrix is not positive semidefinite (min eigenvalue {0})")]
    NotPsd(f64),

    #[error("invalid quantum object: {0}")]
    InvalidQuantum(String),

    #[error("no convergence after {0} iterations")]
    NonConvergence(usize),

    #[error("sampling cutoff exceeded: {draws} draws > cutoff {cutoff}")]
    CutoffExceeded { draws: u64, cutoff: u64 },
}

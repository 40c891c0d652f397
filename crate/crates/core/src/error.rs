use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid group table: {0}")]
    InvalidGroup(String),
    #[error("invalid homomorphism: {0}")]
    InvalidHom(String),
    #[error("subgroup is not normal")]
    NotNormal,
    #[error("not a subgroup: {0}")]
    NotSubgroup(String),
    #[error("capacity exceeded: {what} (bound {bound})")]
    Capacity { what: String, bound: usize },
    #[error("unknown group family or selector: {0}")]
    UnknownFamily(String),
    #[error("invalid G-set: {0}")]
    InvalidGSet(String),
    #[error("span feet do not match in composition")]
    MiddleMismatch,
    #[error("Mackey axiom violated: {0}")]
    AxiomViolation(String),
    #[error("resolution too short: degree {degree} needs {needed} stages, have {have}")]
    ResolutionTooShort { degree: usize, needed: usize, have: usize },
    #[error("Cantor-Bendixson iteration exceeded tree depth {depth} without a certificate")]
    DepthExhausted { depth: usize },
    #[error("data leaves the periodic-tail class: {0}")]
    NonPeriodicTail(String),
    #[error("point height {height} is not above stage {stage}")]
    HeightTooLow { height: usize, stage: usize },
    #[error("resolution unavailable: {0}")]
    ResolutionUnavailable(String),
    #[error("invalid sheaf: {0}")]
    InvalidSheaf(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("malformed input: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

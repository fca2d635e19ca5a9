use thiserror::Error;

/// Errors produced by graph construction, solves, moves, and engines.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("vertex index {index} out of range for {count} vertex orbits")]
    VertexOutOfRange { index: usize, count: usize },

    #[error("edge weight {0} is negative")]
    NegativeWeight(f64),

    #[error("offset has length {found}, expected dimension {expected}")]
    OffsetDimension { expected: usize, found: usize },

    #[error("dimension must be at least 1")]
    ZeroDimension,

    #[error("unknown lattice preset `{0}`")]
    UnknownPreset(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("positive-weight subgraph is not connected")]
    Disconnected,

    #[error("period matrix is singular")]
    SingularPeriod,

    #[error("linear system is singular: {0}")]
    SingularSystem(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("total edge weight is zero")]
    ZeroTotalWeight,

    #[error("matrix is not orthogonal")]
    NotOrthogonal,

    #[error("realization is not standard (deviatoric stress {0:.3e} exceeds tolerance)")]
    NotStandard(f64),

    #[error("splitting candidate at vertex {vertex} is not generic")]
    NonGenericCandidate { vertex: usize },

    #[error("deformation stalled: vertex {vertex} meets the splitting condition but is not generic")]
    NonGenericStall { vertex: usize },

    #[error("move cap of {cap} exceeded (possible infinite repetition of local moves)")]
    MoveCapExceeded { cap: usize },

    #[error("initial energy is zero; loss ratio undefined")]
    ZeroInitialEnergy,

    #[error("displacement law violated: {0}")]
    ModelViolation(String),

    #[error("lattice sum not converged: {0}")]
    SumNotConverged(String),
}

pub type Result<T> = std::result::Result<T, Error>;

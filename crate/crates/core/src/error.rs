use thiserror::Error;

/// Everything that can go wrong in this crate.
///
/// Each variant carries a stable machine-readable code (see [`Error::code`])
/// so callers such as the CLI can report `error[<code>]: <message>` without
/// string-matching on display text.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv failure: {0}")]
    Csv(#[from] csv::Error),
    #[error("json failure: {0}")]
    Json(#[from] serde_json::Error),
    #[error("could not parse {0}")]
    Parse(String),

    #[error("dataset has no rows")]
    EmptyDataset,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("index {index} out of range (bound {bound})")]
    IndexOutOfRange { index: usize, bound: usize },
    #[error("constraint pairs a point with itself: ({index}, {index})")]
    SelfPair { index: usize },
    #[error("pair ({i}, {j}) appears as both must-link and cannot-link")]
    ConflictingPair { i: usize, j: usize },
    #[error("invalid cluster count k={k} for n={n} points")]
    InvalidK { k: usize, n: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("labels required but dataset has none")]
    MissingLabels,
    #[error("assignments have different lengths: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },

    #[error("cosine distance undefined for a zero vector")]
    ZeroVector,
    #[error("matrix is not positive semidefinite")]
    NotPositiveSemidefinite,
    #[error("matrix is singular")]
    SingularMatrix,
    #[error("degenerate dataset: {0}")]
    DegenerateDataset(&'static str),
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("dimension {dim} is not divisible by segment length {segment}")]
    SegmentLength { dim: usize, segment: usize },

    #[error("exact enumeration needs {combinations} medoid sets, budget is {budget}")]
    BudgetExceeded { combinations: u128, budget: u128 },
    #[error("point {point} is the sole member of cluster {cluster}")]
    SoleMember { point: usize, cluster: usize },
    #[error("point {point} is in cluster {found}, not {expected}")]
    ClusterMismatch { point: usize, expected: usize, found: usize },

    #[error("source and target centers coincide")]
    CoincidentCenters,
    #[error("every candidate move is forbidden")]
    AllMovesForbidden,

    #[error("multiplier {value} is positive; dual multipliers must be <= 0")]
    PositiveMultiplier { value: f64 },
    #[error("dual solution does not match the constraint set: {0}")]
    DualMismatch(String),
    #[error("epsilon {0} outside the open interval (0, 1)")]
    InvalidEpsilon(f64),
    #[error("alpha {0} outside [0, 1]")]
    InvalidAlpha(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("row {row} of the soft assignment is not a probability vector")]
    NotRowStochastic { row: usize },
    #[error("target places mass on cluster {cluster} for row {row} where q is zero")]
    SupportViolation { row: usize, cluster: usize },
    #[error("log argument is zero: {0}")]
    LogDomain(&'static str),

    #[error("no candidate pairs available for constraint generation")]
    EmptyPool,
    #[error("requested {requested} pairs but only {available} are available")]
    PoolExhausted { requested: usize, available: usize },
    #[error("rejection sampling gave up: {0}")]
    RejectionOverflow(&'static str),
}

impl Error {
    /// Stable identifier for scripted consumers.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
            Error::Parse(_) => "parse",
            Error::EmptyDataset => "empty-dataset",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::IndexOutOfRange { .. } => "index-out-of-range",
            Error::SelfPair { .. } => "self-pair",
            Error::ConflictingPair { .. } => "conflicting-pair",
            Error::InvalidK { .. } => "invalid-k",
            Error::NonFinite(_) => "non-finite",
            Error::MissingLabels => "missing-labels",
            Error::LengthMismatch { .. } => "length-mismatch",
            Error::ZeroVector => "zero-vector",
            Error::NotPositiveSemidefinite => "not-positive-semidefinite",
            Error::SingularMatrix => "singular-matrix",
            Error::DegenerateDataset(_) => "degenerate-dataset",
            Error::InvalidMatrix(_) => "invalid-matrix",
            Error::SegmentLength { .. } => "segment-length",
            Error::BudgetExceeded { .. } => "budget-exceeded",
            Error::SoleMember { .. } => "sole-member",
            Error::ClusterMismatch { .. } => "cluster-mismatch",
            Error::CoincidentCenters => "coincident-centers",
            Error::AllMovesForbidden => "all-moves-forbidden",
            Error::PositiveMultiplier { .. } => "positive-multiplier",
            Error::DualMismatch(_) => "dual-mismatch",
            Error::InvalidEpsilon(_) => "invalid-epsilon",
            Error::InvalidAlpha(_) => "invalid-alpha",
            Error::InvalidConfig(_) => "invalid-config",
            Error::NotRowStochastic { .. } => "not-row-stochastic",
            Error::SupportViolation { .. } => "support-violation",
            Error::LogDomain(_) => "log-domain",
            Error::EmptyPool => "empty-pool",
            Error::PoolExhausted { .. } => "pool-exhausted",
            Error::RejectionOverflow(_) => "rejection-overflow",
        }
    }
}

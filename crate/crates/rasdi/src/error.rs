use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("algebraic block D is numerically singular")]
    SingularD,

    #[error("step matrix is singular at dt = {dt}")]
    SingularStepMatrix { dt: f64 },

    #[error("initial state is inconsistent (constraint residual {residual:e})")]
    InconsistentInitialState { residual: f64 },

    #[error("base sets are not a disjoint cover: {0}")]
    NotACover(String),

    #[error("partition has no interface")]
    EmptyInterface,

    #[error("unknown selector `{0}`")]
    UnknownSelector(String),

    #[error("local matrix of partition {part} is singular")]
    SingularLocalMatrix { part: usize },

    #[error("expected exactly two partitions, found {0}")]
    NotTwoPartitions(usize),

    #[error("interface operator has an eigenvalue at 1")]
    UnitEigenvalue,

    #[error("difference history is rank deficient (rank {rank} of {dim})")]
    RankDeficientHistory { rank: usize, dim: usize },

    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("node `{0}` is floating")]
    FloatingNode(String),

    #[error("assembled system is singular: {0}")]
    SingularAlgebraicBlock(String),

    #[error("unknown circuit `{0}`")]
    UnknownCircuit(String),

    #[error("conductance denominator {value:e} is not positive")]
    CoefficientBlowup { value: f64 },

    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("history holds {have} samples, {need} required")]
    HistoryNotFull { have: usize, need: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn at_step(self, step: usize) -> Error {
        match self {
            e @ Error::Step { .. } => e,
            e => Error::Step {
                step,
                source: Box::new(e),
            },
        }
    }

    /// Stable machine-readable code, printed by the CLI on failure.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::SingularD => "singular_d",
            Error::SingularStepMatrix { .. } => "singular_step_matrix",
            Error::InconsistentInitialState { .. } => "inconsistent_initial_state",
            Error::NotACover(_) => "not_a_cover",
            Error::EmptyInterface => "empty_interface",
            Error::UnknownSelector(_) => "unknown_selector",
            Error::SingularLocalMatrix { .. } => "singular_local_matrix",
            Error::NotTwoPartitions(_) => "not_two_partitions",
            Error::UnitEigenvalue => "unit_eigenvalue",
            Error::RankDeficientHistory { .. } => "rank_deficient_history",
            Error::Parse { .. } => "parse",
            Error::FloatingNode(_) => "floating_node",
            Error::SingularAlgebraicBlock(_) => "singular_algebraic_block",
            Error::UnknownCircuit(_) => "unknown_circuit",
            Error::CoefficientBlowup { .. } => "coefficient_blowup",
            Error::Step { source, .. } => source.code(),
            Error::HistoryNotFull { .. } => "history_not_full",
            Error::InvalidConfig(_) => "invalid_config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

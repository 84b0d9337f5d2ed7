use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("condition check did not converge: {0}")]
    NonconvergentCheck(String),

    #[error("condition violated: {0}")]
    ConditionViolation(String),

    #[error("window of {vertices} vertices exceeds the memory budget of {budget} adjacency bits")]
    WindowTooLarge { vertices: u64, budget: u64 },

    #[error("invalid vertex pair: {0}")]
    InvalidPair(String),

    #[error("buffer {buffer} gives miss bound {eps:e}, above the ceiling {ceiling:e}")]
    BufferTooSmall { buffer: u64, eps: f64, ceiling: f64 },

    #[error("iteration ceiling of {ceiling} reached while {context}")]
    IterationCeiling { ceiling: u64, context: &'static str },

    #[error("too few regeneration cycles: {found} (need at least {needed})")]
    TooFewCycles { found: usize, needed: usize },

    #[error("too few skeleton points: {found} (need at least {needed})")]
    TooFewSkeletonPoints { found: usize, needed: usize },

    #[error("invalid poset: {0}")]
    PosetInvalid(String),

    #[error("eigen-solver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    EigenNoConvergence { sweeps: usize, off_norm: f64 },

    #[error("empty sample")]
    EmptySample,

    #[error("malformed graph file, line {line}: {reason}")]
    GraphFormat { line: usize, reason: String },

    #[error("replication {replication} failed: {source}")]
    Replication {
        replication: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("run interrupted after {completed} of {total} replications")]
    Interrupted { completed: u64, total: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

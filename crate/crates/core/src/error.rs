use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("binomial C({n}, {k}) overflows u64")]
    BinomialOverflow { n: u64, k: u64 },

    #[error("item {item} outside 1..={n}")]
    ItemOutOfRange { item: usize, n: usize },

    #[error("rank {rank} out of range for level {level} over {n} items")]
    RankOutOfRange { n: usize, level: usize, rank: usize },

    #[error("no column-orthonormal map from level {level} to {} over {n} items (needs level + 1 <= n - level)", level + 1)]
    LevelNotMappable { n: usize, level: usize },

    #[error(
        "coefficient solve for n={n}, level={level} did not converge (max residual {residual:e})"
    )]
    NoConvergence {
        n: usize,
        level: usize,
        residual: f64,
    },

    #[error("dense map of {rows}x{cols} exceeds the size limit of {limit} per side")]
    DenseTooLarge {
        rows: usize,
        cols: usize,
        limit: usize,
    },

    #[error("superset matrix for n={n}, level={level} is rank deficient")]
    RankDeficient { n: usize, level: usize },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("generated 3SAT instance (n={n}, c={c}, seed={seed}) has no satisfying assignment")]
    Insoluble { n: usize, c: usize, seed: u64 },

    #[error("no good sets at start level {level}")]
    NoGoodsAtStart { level: usize },

    #[error("norm drifted to {norm} at level {level}")]
    NormDrift { level: usize, norm: f64 },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Error {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

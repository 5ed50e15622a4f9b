use std::path::PathBuf;

/// Errors surfaced by environments, learners, analysis and the experiment harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical divergence in {context}")]
    Divergence { context: String },

    #[error("{0} must not be empty")]
    Empty(&'static str),

    #[error("normalizer is zero: ground truth is constant over the dataset")]
    ZeroNormalizer,

    #[error("confidence interval needs at least two seeds, got {0}")]
    TooFewSeeds(usize),

    #[error("{failed} of {total} seeds failed; first: {first}")]
    SeedsFailed { failed: usize, total: usize, first: String },

    #[error("malformed snapshot: {0}")]
    Snapshot(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

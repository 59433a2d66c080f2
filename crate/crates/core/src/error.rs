use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("{what} = {value:e} m lies outside the grid span [{lo:e}, {hi:e}] m")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("inconsistent temporal offsets: {0}")]
    InconsistentTemporal(String),

    #[error("herald impossible: the amplitude slice at the detector vanishes")]
    HeraldImpossible,

    #[error("{0} temporal branches survive merging (limit {limit})", limit = crate::engine::MAX_TEMPORAL_BRANCHES)]
    BranchExplosion(usize),

    #[error("expected a single temporal branch, found {0}")]
    MultipleBranches(usize),

    #[error("no solution: {0}")]
    NoSolution(String),
}

pub type Result<T> = std::result::Result<T, Error>;

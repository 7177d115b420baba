//! Error type shared by all modules of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix has non-finite entries")]
    InvalidMatrix,
    #[error("matrix is not skew-symmetric (residual {residual:.3e})")]
    NotSkewSymmetric { residual: f64 },
    #[error("operator is not positive semidefinite (eigenvalue {eigenvalue:.3e})")]
    NotPSD { eigenvalue: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("ambient dimension must be positive")]
    EmptyAmbient,
    #[error("no almost-faithful representation: rank {rank} exceeds {max} weight slots")]
    NoAlmostFaithfulRep { rank: usize, max: usize },
    #[error("no real irreducible representation of dimension {dimension}")]
    NoRealIrrep { dimension: usize },
    #[error("integer basis has rank below {expected}")]
    RankDeficient { expected: usize },
    #[error("covariance has no eigenvalue above epsilon = {epsilon:.3e}")]
    DegenerateCloud { epsilon: f64 },
    #[error("point {index} has an empty neighborhood")]
    IsolatedPoint { index: usize },
    #[error("local covariance at point {index} has rank below the intrinsic dimension")]
    TangentEstimationFailed { index: usize },
    #[error("point {index} is zero; the span projection is undefined")]
    ZeroPointInCloud { index: usize },
    #[error("bottom eigen-frame is degenerate after skew-symmetrization")]
    DegenerateEigenframe,
    #[error("frame is far from any commuting block form (residual {residual:.3e})")]
    NonReducibleFrame { residual: f64 },
    #[error("candidate representation list is empty")]
    NoCandidates,
    #[error("optimizer produced a non-finite cost")]
    OptimizerDiverged,
    #[error("requested an empty orbit sample")]
    EmptySample,
    #[error("point set is empty")]
    EmptySet,
    #[error("weights do not sum to one (sum = {sum})")]
    BadWeights { sum: f64 },
    #[error("base point has zero mass in irrep block {block}")]
    DegenerateBasePoint { block: usize },
    #[error("resampling cap exceeded for {stalled} of {total} points")]
    SamplerStalled { stalled: usize, total: usize },
    #[error("ambient dimension {n} exceeds the supported maximum {max}")]
    AmbientTooLarge { n: usize, max: usize },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

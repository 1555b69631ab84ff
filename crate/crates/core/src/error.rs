use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix must have at least one row and one column (got {rows}x{cols})")]
    EmptyMatrix { rows: usize, cols: usize },
    #[error("expected {expected} entries for a {rows}x{cols} matrix, got {got}")]
    DataLength {
        rows: usize,
        cols: usize,
        expected: usize,
        got: usize,
    },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },
    #[error("matrix has fewer rows than columns ({rows}x{cols})")]
    WideMatrix { rows: usize, cols: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("null space is empty: matrix has full column rank {rank}")]
    FullRank { rank: usize },
    #[error("matrix is numerically singular (condition estimate {condition:e})")]
    NearSingular { condition: f64 },
    #[error("eigensolver did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error(
        "lower block of the eigenvector basis is singular (smallest singular value {min_singular_value:e}); nongeneric instance"
    )]
    LowerBlockSingular { min_singular_value: f64 },
    #[error("fixed columns are rank deficient (rank {rank} < {expected})")]
    RankDeficientFixedColumns { rank: usize, expected: usize },
    #[error("fixed rows are rank deficient (rank {rank} < {expected}); select independent rows first")]
    RankDeficientUpperRows { rank: usize, expected: usize },
    #[error("candidate violates the fixed-row constraints (residual {residual:e})")]
    InfeasibleCandidate { residual: f64 },
    #[error("incompatible configuration: {0}")]
    IncompatibleConfig(String),
}

impl Error {
    /// Short stable tag used in traces and exit messages.
    pub fn tag(&self) -> &'static str {
        match self {
            Error::EmptyMatrix { .. } => "EmptyMatrix",
            Error::DataLength { .. } => "DataLength",
            Error::NonFinite { .. } => "NonFinite",
            Error::NonSquare { .. } => "NonSquare",
            Error::WideMatrix { .. } => "WideMatrix",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::FullRank { .. } => "FullRank",
            Error::NearSingular { .. } => "NearSingular",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::NotPositiveDefinite { .. } => "NotPositiveDefinite",
            Error::InvalidPartition(_) => "InvalidPartition",
            Error::LowerBlockSingular { .. } => "LowerBlockSingular",
            Error::RankDeficientFixedColumns { .. } => "RankDeficientFixedColumns",
            Error::RankDeficientUpperRows { .. } => "RankDeficientUpperRows",
            Error::InfeasibleCandidate { .. } => "InfeasibleCandidate",
            Error::IncompatibleConfig(_) => "IncompatibleConfig",
        }
    }
}

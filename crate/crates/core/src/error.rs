use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value in {context} (parameter index {index:?})")]
    NonFinite {
        context: String,
        index: Option<usize>,
    },

    #[error("gram matrix not SPD: pivot {pivot} at row {row}")]
    NotSpd { row: usize, pivot: f64 },

    #[error("internal SPD violation: quadratic form R^T G^-1 R = {0}")]
    NegativeQuadraticForm(f64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("basis index {index} out of range 1..={dimension}")]
    IndexOutOfRange { index: usize, dimension: usize },

    #[error("quadrature mesh is not sorted ascending")]
    UnsortedMesh,

    #[error("no exact solution registered for this problem")]
    NoExactSolution,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

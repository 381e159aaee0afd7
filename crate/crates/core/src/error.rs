use thiserror::Error;

/// Errors produced by the GNAR toolkit.
#[derive(Debug, Error)]
pub enum GnarError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("insufficient data: need more than {needed} time steps, have {available}")]
    InsufficientData { needed: usize, available: usize },

    #[error("singular design: column(s) {} are collinear with earlier columns", columns.join(", "))]
    SingularDesign { columns: Vec<String> },

    #[error("degenerate series: total centred variation is zero")]
    DegenerateSeries,

    #[error("degenerate network: {0}")]
    DegenerateNetwork(String),

    #[error("coefficients are not stationary (companion spectral radius {spectral_radius:.6})")]
    Nonstationary { spectral_radius: f64 },

    #[error("invalid slice: {0}")]
    InvalidSlice(String),

    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },

    #[error("line {line}: duplicate edge {a} -- {b}")]
    DuplicateEdge { line: usize, a: String, b: String },

    #[error("line {line}: self-loop on node {label}")]
    SelfLoop { line: usize, label: String },

    #[error("series does not align with network: {0}")]
    Alignment(String),

    #[error("row {row}, column {column}: cannot parse {value:?} as a number")]
    Cell {
        row: usize,
        column: String,
        value: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = GnarError> = std::result::Result<T, E>;

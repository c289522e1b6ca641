use thiserror::Error;

pub type Result<T> = std::result::Result<T, SmashError>;

#[derive(Debug, Error)]
pub enum SmashError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("dense budget exceeded: {rows}x{cols} exceeds {budget} entries")]
    DenseBudget { rows: usize, cols: usize, budget: usize },

    #[error("boxes are not well separated (ratio {ratio:.3} > tau {tau:.3})")]
    NotSeparated { ratio: f64, tau: f64 },

    #[error("zero matrix")]
    ZeroMatrix,

    #[error("strong RRQR did not converge within {0} swaps")]
    SwapLimit(usize),

    #[error("singular pivot block at node {node}")]
    SingularPivot { node: usize },

    #[error("tree mismatch: {0}")]
    TreeMismatch(String),

    #[error("unsupported structure: {0}")]
    Unsupported(String),

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl SmashError {
    /// Process exit status: 3 for numerical breakdown, 2 for everything the
    /// caller can fix by changing the input.
    pub fn exit_code(&self) -> i32 {
        match self {
            SmashError::SingularPivot { .. } | SmashError::SwapLimit(_) => 3,
            _ => 2,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        SmashError::InvalidInput(msg.into())
    }
}

use thiserror::Error;

/// Errors raised by model construction, analysis and simulation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("structural error: {0}")]
    Structure(String),

    #[error("singular system{}: {what}", freq_suffix(*.omega))]
    Singular { what: String, omega: Option<f64> },

    #[error(
        "defective or near-defective state matrix (eigenvector condition {condition:.3e}) near eigenvalues {cluster}"
    )]
    Defective { condition: f64, cluster: String },

    #[error("rank-deficient least-squares problem: effective rank {rank} of {required}")]
    RankDeficient { rank: usize, required: usize },

    #[error("model violates Newton's second law (max |C·B| = {max_cb:.3e} > {bound:.3e}); impose it first")]
    NewtonViolation { max_cb: f64, bound: f64 },

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn freq_suffix(omega: Option<f64>) -> String {
    match omega {
        Some(w) => format!(" at ω = {w:.6e} rad/s"),
        None => String::new(),
    }
}

impl Error {
    /// True for failures caused by the numbers rather than by malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Singular { .. } | Error::Defective { .. } | Error::RankDeficient { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;

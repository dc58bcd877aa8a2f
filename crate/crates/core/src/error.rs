use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("mode index {index} out of range (basis holds {len} modes)")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("permittivity not resolved by quadrature: relative Hermiticity defect {defect:.3e}")]
    Resolution { defect: f64 },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("contour count not integral: value {value:.6}, rounding defect {defect:.3e} (contour too close to a characteristic value or quadrature under-resolved)")]
    ContourCount { value: f64, defect: f64 },

    #[error("multiplicity resolution failed at xi = {xi}: cluster size {cluster_size}, sum of partial multiplicities {chain_total}")]
    Multiplicity {
        xi: crate::C64,
        cluster_size: usize,
        chain_total: usize,
    },

    #[error("operation not applicable: {0}")]
    NotApplicable(String),

    #[error("trace matrix near-singular: smallest singular value {sigma_min:.3e}")]
    SingularTrace { sigma_min: f64 },

    #[error("inconsistent mode/trace data: {0}")]
    Inconsistent(String),

    #[error("config error{}: {message}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Config { line: Option<usize>, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

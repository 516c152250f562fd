use thiserror::Error;

/// Failure modes shared by every module. `exit_code` maps them onto the CLI contract.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("order {j} out of range for dimension {n}")]
    OrderOutOfRange { j: usize, n: usize },
    #[error("index {index} out of range for dimension {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("degenerate direction: x = 0")]
    DegenerateDirection,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no admissible root: {0}")]
    NoRoot(String),
    #[error("inadmissible alpha {alpha}: below alpha1 = {alpha1}")]
    Inadmissible { alpha: f64, alpha1: f64 },
    #[error("cone violation: sigma_{order} = {value:e} at r = {r}")]
    ConeViolation { order: usize, r: f64, value: f64 },
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("singular denominator at r = {r}")]
    Singularity { r: f64 },
    #[error("fixed point did not converge; residual history {history:?}")]
    Divergence { history: Vec<f64> },
    #[error("integral does not converge: {0}")]
    DivergentIntegral(String),
    #[error("c = {c} is not above the threshold c~ = {c_tilde}")]
    BelowThreshold { c: f64, c_tilde: f64 },
    #[error("barrier construction failed: worst margin {worst:e} at {location:?}")]
    BarrierConstruction { worst: f64, location: Vec<f64> },
    #[error("envelope ordering violated: lower - upper = {gap:e} at {location:?}")]
    Ordering { gap: f64, location: Vec<f64> },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("numeric failure in {op}: {detail}")]
    Numeric { op: &'static str, detail: String },
}

impl Error {
    pub fn numeric(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Numeric {
            op,
            detail: detail.into(),
        }
    }

    /// 2 for configuration-type failures, 3 for numerical ones.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParams(_)
            | Error::Hypothesis(_)
            | Error::OrderOutOfRange { .. }
            | Error::IndexOutOfRange { .. }
            | Error::Domain(_)
            | Error::NotApplicable(_)
            | Error::BelowThreshold { .. }
            | Error::Inadmissible { .. } => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

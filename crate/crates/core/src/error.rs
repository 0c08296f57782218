use crate::linalg::TruncationReport;
use crate::C64;
use thiserror::Error;

pub type Result<T, E = KbmError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum KbmError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported base dimension n = {0}; only n = 2 (fiber S^1) is implemented")]
    UnsupportedDimension(usize),

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("eigensolver failed to converge on a {0}x{0} block")]
    EigenFailure(usize),

    #[error(
        "truncation ceiling exceeded (M_used = {}, drift = {:e})",
        report.m_used,
        report.max_drift
    )]
    TruncationCeiling { report: Box<TruncationReport> },

    #[error("truncation did not converge for modes {modes:?}")]
    UnconvergedModes { modes: Vec<[i64; 2]> },

    #[error("singular block: {0}")]
    Singular(String),

    #[error("effective scalar vanishes on the contour near {0}")]
    ZeroOnBoundary(C64),

    #[error("winding integral {0} did not settle to an integer")]
    WindingNotIntegral(f64),

    #[error("root iteration did not converge after {0} steps")]
    NoConvergence(usize),

    #[error("tail not controlled: top-decile norm {tail:e} vs sup {sup:e}; increase K_max")]
    TailNotControlled { tail: f64, sup: f64 },

    #[error("spectral parameter {0} is too close to the spectrum")]
    NearSpectrum(C64),

    #[error("beta = {beta} collides with Re lambda = {re}")]
    BetaCollision { beta: f64, re: f64 },

    #[error("cluster projector near {0} did not converge")]
    ProjectorFailure(C64),

    #[error("propagation grew the norm of mode {mode:?} by a factor {growth}")]
    ContractionViolated { mode: [i64; 2], growth: f64 },

    #[error("tail certificate failed on shells {0:?}")]
    TailNotCertified(Vec<f64>),

    #[error("step budget exceeded: {steps} steps > {budget}")]
    StepBudget { steps: u64, budget: u64 },
}

impl KbmError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        KbmError::InvalidParameter(msg.into())
    }
}

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("bad shape: {0}")]
    BadShape(String),

    #[error("matrix is rank deficient (smallest/largest singular value = {ratio:e})")]
    RankDeficient { ratio: f64 },

    #[error("matrix is not positive definite (smallest eigenvalue = {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("matrix is singular")]
    SingularMatrix,

    #[error("Fisher information is singular for parameter {index}")]
    SingularFim { index: usize },

    #[error("argument outside the domain: {0}")]
    DomainError(String),

    #[error("continued fraction did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("invalid configuration: {0}")]
    BadSpec(String),

    #[error("need at least {required} samples, got {got}")]
    TooFewSamples { required: usize, got: usize },

    #[error("target confidence is infeasible; best achievable is {max_confidence} at m = {max_m}")]
    Infeasible { max_confidence: f64, max_m: usize },

    #[error("{excluded} of {trials} trials were degenerate (singular FIM or rank-deficient draw), above the 0.1% limit")]
    TooManyExcluded { excluded: usize, trials: usize },

    #[error("non-finite entry in input")]
    NonFinite,
}

impl Error {
    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::BadShape(_) => "BadShape",
            Error::RankDeficient { .. } => "RankDeficient",
            Error::NotPositiveDefinite { .. } => "NotPositiveDefinite",
            Error::SingularMatrix => "SingularMatrix",
            Error::SingularFim { .. } => "SingularFim",
            Error::DomainError(_) => "DomainError",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::BadSpec(_) => "BadSpec",
            Error::TooFewSamples { .. } => "TooFewSamples",
            Error::Infeasible { .. } => "Infeasible",
            Error::TooManyExcluded { .. } => "TooManyExcluded",
            Error::NonFinite => "NonFinite",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

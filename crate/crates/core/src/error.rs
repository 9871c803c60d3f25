use thiserror::Error;

/// Errors surfaced by the numerical routines.
///
/// Soft conditions (budget exhaustion, grid-boundary maxima, self-convergence
/// misses) are carried as warnings on the result types instead.
#[derive(Debug, Error)]
pub enum Error {
    #[error("argument outside the domain: {0}")]
    Domain(String),

    #[error("result overflows f64: {0}")]
    Overflow(String),

    #[error(
        "quadrature did not converge: worst subinterval [{lo:e}, {hi:e}] \
         (estimate {value:e}, error {err:e})"
    )]
    QuadratureNonconvergence { lo: f64, hi: f64, value: f64, err: f64 },

    #[error("operator requires a nonnegative input, got a signed multi-term function")]
    SignedInput,

    #[error("norm diverges or does not stabilise: {0}")]
    NormDivergence(String),

    #[error("sampled range is insufficient: {0}")]
    RangeInsufficient(String),

    #[error("admissibility violated: {0}")]
    Admissibility(String),

    #[error("normalization check failed: {0}")]
    Normalization(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

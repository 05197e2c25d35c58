use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("series `{asset}` cannot be repaired: {reason}")]
    UnrepairableSeries { asset: String, reason: String },

    #[error("every asset was excluded from the panel")]
    EmptyPanel,

    #[error("panel needs at least {needed} assets, found {found}")]
    InsufficientAssets { needed: usize, found: usize },

    #[error("non-positive price {value} for `{asset}` at index {index}")]
    InvalidPrice {
        asset: String,
        index: usize,
        value: f64,
    },

    #[error("insufficient data: need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("fit diverged: {reason} (best log-likelihood {best_loglik})")]
    FitDiverged {
        reason: String,
        best_loglik: f64,
        best_params: Vec<f64>,
    },

    #[error("all {tried} candidate models failed to converge")]
    AllModelsFailed { tried: usize },

    #[error("infeasible constraints: {0}")]
    InfeasibleConstraints(String),

    #[error("no asset has expected return above the risk-free rate {risk_free}")]
    NoPositiveExcessReturn { risk_free: f64 },

    #[error("configuration error: {0}")]
    ConfigError(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input fell outside the region an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// A caller broke a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid bin layout: {0}")]
    InvalidLayout(String),

    #[error("invalid selection distribution: {0}")]
    InvalidSelection(String),

    /// Probability bound tables that admit no selection distribution at all.
    #[error("infeasible probability bounds: {0}")]
    InfeasibleBounds(String),

    #[error("simplex iteration limit reached after {0} pivots")]
    IterationLimit(usize),

    /// The simplex tableau lost feasibility to round-off.
    #[error("numerical failure in simplex: {0}")]
    NumericalFailure(String),

    #[error("no feasible mechanism at eps = {0}")]
    NoFeasibleMechanism(f64),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

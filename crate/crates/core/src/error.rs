use thiserror::Error;

/// Errors produced by model construction, sampling, estimation and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid MDP: {0}")]
    InvalidMdp(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("policy row for state {state} sums to {sum} instead of 1")]
    DegeneratePolicyRow { state: usize, sum: f64 },

    #[error("behaviour policy has no support for action {action} in state {state}")]
    SupportViolation { state: usize, action: usize },

    #[error("invalid lift domain: {0}")]
    InvalidDomain(String),

    #[error("need at least {needed} trajectories, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("invalid search configuration: {0}")]
    InvalidSearchConfig(String),

    #[error("enumeration refused: more than {budget} leaves (stopped at {leaves})")]
    BudgetExceeded { leaves: u64, budget: u64 },

    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed trajectory log at line {line}: {message}")]
    MalformedLog { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("{}: {source}", path.display())]
    File {
        path: std::path::PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn file(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
        move |source| Error::File {
            path: path.to_path_buf(),
            source,
        }
    }
}

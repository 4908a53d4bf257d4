use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParams { name: &'static str, reason: String },

    #[error("cannot step an episode whose status is {0:?}")]
    EpisodeFinished(crate::dynamics::Status),

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("policy is undefined on reachable observation {0}")]
    PolicyUndefined(String),

    #[error("policy mode mismatch: policy is {policy}, environment is {env}")]
    ModeMismatch { policy: &'static str, env: &'static str },

    #[error("singular linear system while evaluating policy")]
    SingularSystem,

    #[error("value iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("strategy `{0}` is indexed by pressure and needs a visible-pressure environment")]
    NeedsVisiblePressure(&'static str),

    #[error("unknown strategy label `{0}`")]
    UnknownLabel(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error(
        "run {run} (seed {seed}): Monte-Carlo mean {mc:.4} disagrees with exact {exact:.4} beyond 3 standard errors ({se:.4})"
    )]
    OracleDisagreement { run: usize, seed: u64, mc: f64, exact: f64, se: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

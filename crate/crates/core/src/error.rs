use thiserror::Error;

/// Errors raised by the bandit laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("context {0} is out of range")]
    BadContext(usize),

    #[error("action {action} is not valid here: {reason}")]
    BadAction { action: usize, reason: String },

    #[error("non-finite reward observed for action {0}")]
    NonFinite(usize),

    #[error("observation has zero likelihood under every support atom")]
    ZeroLikelihood,

    #[error("unsupported observation law: {0}")]
    Unsupported(String),

    #[error("conditioning event has zero posterior probability")]
    ZeroProbability,

    #[error("{what} has size {size}, above the exact-search cap {cap}; raise the cap setting to proceed")]
    CapExceeded {
        what: &'static str,
        size: usize,
        cap: usize,
    },

    #[error("grid has {0} points, above the 10^7 limit")]
    GridTooLarge(u128),

    #[error("linear program: {0}")]
    Lp(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("round {round}: {source}")]
    AtRound {
        round: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn at_round(self, round: usize) -> Self {
        Error::AtRound {
            round,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("invalid behavior profile: {0}")]
    InvalidProfile(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("effective Markov chain is not ergodic: {0} eigenvalues within 1e-9 of 1")]
    NonErgodic(usize),

    #[error("singular linear system: {0}")]
    Singular(String),

    /// A Q/SARSA evaluation hit the simplex boundary where `log X` is undefined.
    #[error("profile on simplex boundary at agent {agent}, state {state}, action {action} (X = {value:e})")]
    Boundary {
        agent: usize,
        state: usize,
        action: usize,
        value: f64,
    },

    #[error("non-finite value: {0}")]
    Numeric(String),

    #[error("at step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    /// A Lyapunov run left the Jacobian's domain after `completed` QR steps.
    #[error("trajectory left the Jacobian domain after {completed} steps: {source}")]
    Partial {
        completed: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("game file: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Strips `AtStep`/`Partial` wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtStep { source, .. } | Error::Partial { source, .. } => source.root(),
            other => other,
        }
    }
}

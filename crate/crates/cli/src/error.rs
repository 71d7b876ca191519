use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, unreadable game file, invalid parameters or profile.
    #[error("configuration error: {0}")]
    Config(String),
    /// The dynamics failed: boundary profile, non-ergodic chain, singular system.
    #[error("runtime error: {0}")]
    Runtime(String),
    #[error("cannot write {}: {source}", path.display())]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) | CliError::Output { .. } => 3,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }
}

impl From<tdlimit::Error> for CliError {
    fn from(e: tdlimit::Error) -> Self {
        use tdlimit::Error as E;
        match e.root() {
            E::Boundary { .. } | E::NonErgodic(_) | E::Singular(_) | E::Numeric(_) => {
                CliError::Runtime(e.to_string())
            }
            _ => CliError::Config(e.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

use thiserror::Error;

/// Failure of a subcommand, classified by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Data(String),

    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 1,
            Self::Data(_) => 2,
            Self::Numerical(_) => 3,
        }
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Self::Data(msg.into())
    }

    pub fn io(path: &std::path::Path, err: impl std::fmt::Display) -> Self {
        Self::Data(format!("{}: {err}", path.display()))
    }
}

impl From<declust::Error> for CliError {
    fn from(err: declust::Error) -> Self {
        use declust::Error as E;
        match err {
            E::SamplerExhausted { .. }
            | E::NonFiniteStart
            | E::FitFailed
            | E::StateMismatch(_)
            | E::MissingMother
            | E::UnfrozenTarget(_)
            | E::StartMismatch { .. } => Self::Numerical(err.to_string()),
            _ => Self::Data(err.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

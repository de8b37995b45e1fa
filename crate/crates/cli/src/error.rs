use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(coulomb_tmat::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    /// 1 for anything the user can fix in the configuration, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            _ => 3,
        }
    }
}

impl From<coulomb_tmat::Error> for CliError {
    fn from(e: coulomb_tmat::Error) -> Self {
        use coulomb_tmat::Error as E;
        match e {
            E::InvalidParameter(_) | E::ForwardSingularity | E::BranchMismatch(_) | E::DomainError(_) | E::IndexError(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Numerical(other),
        }
    }
}

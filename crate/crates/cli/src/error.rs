use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("bad input: {0}")]
    BadInput(String),
    #[error("not converged: {0}")]
    NotConverged(String),
    #[error(transparent)]
    Library(#[from] graphtv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::NotConverged(_) => 1,
            Self::BadInput(_) => 2,
            // library errors come from invalid graphs, data or decompositions
            Self::Library(e) if is_input_error(e) => 2,
            Self::Library(_) | Self::Io(_) => 1,
        }
    }
}

fn is_input_error(e: &graphtv::Error) -> bool {
    use graphtv::Error as E;
    matches!(
        e,
        E::InvalidArgument(_)
            | E::InvalidGraph(_)
            | E::Parse { .. }
            | E::InvalidDecomposition(_)
            | E::DimensionMismatch { .. }
            | E::NonFinite(_)
            | E::GuardExceeded { .. }
            | E::Unsupported(_)
            | E::Io(_)
    )
}

pub type CliResult<T> = std::result::Result<T, CliError>;

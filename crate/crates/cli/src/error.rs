use blockgame::ErrorKind;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DOMAIN: i32 = 2;
pub const EXIT_BOUND: i32 = 3;
pub const EXIT_MISSING_PARAMETER: i32 = 4;
pub const EXIT_MALFORMED_CONFIG: i32 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, unknown subcommands, unparsable flag values.
    #[error("{0}")]
    Usage(String),
    #[error("missing parameter `{0}`")]
    MissingParameter(String),
    #[error("malformed config: {0}")]
    MalformedConfig(String),
    #[error(transparent)]
    Domain(#[from] blockgame::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::MissingParameter(_) => EXIT_MISSING_PARAMETER,
            CliError::MalformedConfig(_) => EXIT_MALFORMED_CONFIG,
            CliError::Domain(e) => match e.kind() {
                ErrorKind::Domain => EXIT_DOMAIN,
                ErrorKind::Bound => EXIT_BOUND,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

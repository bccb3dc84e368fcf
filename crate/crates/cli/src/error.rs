use shellspec_core::ShellError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] ShellError),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_FAIL: i32 = 2;
pub const EXIT_REFUSED: i32 = 3;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(ShellError::Singular(_) | ShellError::CriticalCoupling(_)) => EXIT_REFUSED,
            _ => EXIT_CONFIG,
        }
    }
}

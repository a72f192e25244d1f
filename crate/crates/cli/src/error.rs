use augcat_core::Error;

/// Process exit codes.
pub const EXIT_OTHER: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_TRANSPORT: u8 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Core(e) => match e {
                Error::InvalidConfig(_)
                | Error::InvalidCatConfig(_)
                | Error::InvalidBounds(_)
                | Error::UnknownTemplate(_)
                | Error::InvalidTemplate(_)
                | Error::EmptyField(_) => EXIT_CONFIG,
                Error::Transport { .. } => EXIT_TRANSPORT,
                Error::InvalidArgument(_) => EXIT_DATA,
                e if e.is_data_error() => EXIT_DATA,
                _ => EXIT_OTHER,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_are_distinct_per_class() {
        let config = CliError::Config("x".into()).exit_code();
        let data = CliError::from(Error::EmptySelection).exit_code();
        let transport = CliError::from(Error::Transport {
            attempts: 4,
            message: "refused".into(),
        })
        .exit_code();
        let other = CliError::from(Error::Io(std::io::Error::other("disk"))).exit_code();
        assert_eq!([config, data, transport, other], [2, 3, 4, 1]);
        assert_eq!(CliError::from(Error::InvalidCatConfig("x".into())).exit_code(), 2);
        assert_eq!(CliError::from(Error::TooFewItemsRemaining).exit_code(), 3);
    }
}

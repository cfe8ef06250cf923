use std::fmt;

/// Exit categories: 1 runtime, 2 usage, 3 data or schema.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Runtime,
    Usage,
    Data,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Usage,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Data,
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Runtime,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Runtime => 1,
            ErrorKind::Usage => 2,
            ErrorKind::Data => 3,
        }
    }

    pub fn code(&self) -> &'static str {
        match self.kind {
            ErrorKind::Runtime => "runtime",
            ErrorKind::Usage => "usage",
            ErrorKind::Data => "data",
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<facta_core::Error> for CliError {
    fn from(e: facta_core::Error) -> Self {
        let message = e.to_string();
        match e {
            facta_core::Error::Io(_) => CliError::runtime(message),
            facta_core::Error::InvalidArgument(_) => CliError::usage(message),
            _ => CliError::data(message),
        }
    }
}

impl From<facta_neural::Error> for CliError {
    fn from(e: facta_neural::Error) -> Self {
        let message = e.to_string();
        match e {
            facta_neural::Error::Core(inner) => inner.into(),
            facta_neural::Error::Io(_) | facta_neural::Error::NonFinite { .. } => CliError::runtime(message),
            facta_neural::Error::InvalidArgument(_) => CliError::usage(message),
            facta_neural::Error::Dimension(_) | facta_neural::Error::Checkpoint(_) => CliError::data(message),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::data(e.to_string())
    }
}

use std::fmt;

use mnl_core::Error;

pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;

/// A failed command: exit status plus a one-line reason.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn validation(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_VALIDATION,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_IO,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io { .. } => EXIT_IO,
            Error::Parse(_) | Error::Validation(_) => EXIT_VALIDATION,
            Error::Degenerate(_) => EXIT_DEGENERATE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let one_line: Vec<&str> = self.message.split_whitespace().collect();
        write!(f, "error: {}", one_line.join(" "))
    }
}

pub type CmdResult<T = ()> = Result<T, Failure>;

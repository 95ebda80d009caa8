//! Process exit codes and the mapping from library errors.

use porcupine::Error;

pub const CHECK_FAILED: u8 = 1;
pub const INFEASIBLE: u8 = 2;
pub const USAGE: u8 = 64;
pub const DATA: u8 = 65;
pub const INTERNAL: u8 = 70;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(USAGE, message)
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self::new(DATA, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(INTERNAL, message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Infeasible(_) | Error::CapExceeded { .. } => INFEASIBLE,
            Error::InvalidParams(_) | Error::InvalidTriple { .. } | Error::FiberConfig(_) => USAGE,
            Error::Parse { .. } | Error::ScheduleInvalid(_) => DATA,
            _ => INTERNAL,
        };
        Failure::new(code, e.to_string())
    }
}

//! Exit-code contract: 0 success or certified, 1 not certified, 2 invalid input,
//! 3 numerical failure.

use std::fmt;

use tubecert::Error;

pub const OK: i32 = 0;
pub const NOT_CERTIFIED: i32 = 1;
pub const INVALID_INPUT: i32 = 2;
pub const NUMERICAL_FAILURE: i32 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn input(message: String) -> Self {
        Failure { code: INVALID_INPUT, message }
    }

    pub fn numerical(message: String) -> Self {
        Failure { code: NUMERICAL_FAILURE, message }
    }

    pub fn context(mut self, what: &str) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub fn code_for(err: &Error) -> i32 {
    match err {
        Error::InvalidInput(_)
        | Error::DegenerateParametrization { .. }
        | Error::NotSimple { .. }
        | Error::ParameterOutOfRange { .. }
        | Error::OutsideChart { .. }
        | Error::NoValidHalfWidth { .. }
        | Error::Mesh(_)
        | Error::MeshChartMismatch(_)
        | Error::Inadmissible(_)
        | Error::Parse { .. } => INVALID_INPUT,
        Error::ProjectionFailed { .. }
        | Error::Quadrature(_)
        | Error::NotConverged { .. }
        | Error::Diverged { .. }
        | Error::LinearSolve(_) => NUMERICAL_FAILURE,
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        Failure { code: code_for(&err), message: err.to_string() }
    }
}

use std::fmt;

use spline_spde::gmrf::GmrfError;
use spline_spde::model::ModelError;
use spline_spde::precision::PrecisionError;
use spline_spde::Error;

/// A failure with the process exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Bad input or configuration; exit code 2.
    Validation(String),
    /// A numerical step failed on valid input; exit code 1.
    Numerical(String),
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        Self::Validation(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 2,
            Self::Numerical(_) => 1,
        }
    }

    /// Prefix the message with where the problem was found.
    pub fn context(self, ctx: impl fmt::Display) -> Self {
        match self {
            Self::Validation(m) => Self::Validation(format!("{ctx}: {m}")),
            Self::Numerical(m) => Self::Numerical(format!("{ctx}: {m}")),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = match self {
            Self::Validation(m) | Self::Numerical(m) => m,
        };
        // one line on stderr, always
        f.write_str(&msg.replace(['\n', '\r'], " "))
    }
}

fn precision_is_numerical(e: &PrecisionError) -> bool {
    matches!(e, PrecisionError::Assembly(_) | PrecisionError::Mass(_))
}

fn is_numerical(e: &Error) -> bool {
    match e {
        Error::Assembly(_) | Error::Gmrf(GmrfError::NotPositiveDefinite { .. }) => true,
        Error::Precision(p) => precision_is_numerical(p),
        Error::Model(m) => match m {
            ModelError::AllStartsFailed(_) | ModelError::Factorization(_) => true,
            ModelError::Precision(p) => precision_is_numerical(p),
            _ => false,
        },
        _ => false,
    }
}

impl<E: Into<Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        let e = e.into();
        if is_numerical(&e) {
            Self::Numerical(e.to_string())
        } else {
            Self::Validation(e.to_string())
        }
    }
}

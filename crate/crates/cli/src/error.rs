use std::path::Path;

use geosel::cellgrid::PartitionError;
use geosel::io::FormatError;
use geosel::selection::SelectionError;
use geosel::selective::EvalError;
use geosel::synth::SynthError;
use thiserror::Error;

/// Error classes, each with its own exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    InputFormat,
    Consistency,
    EmptyResult,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Usage => 2,
            ErrorClass::InputFormat => 3,
            ErrorClass::Consistency => 4,
            ErrorClass::EmptyResult => 5,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            ErrorClass::Usage => "usage",
            ErrorClass::InputFormat => "input-format",
            ErrorClass::Consistency => "consistency",
            ErrorClass::EmptyResult => "empty-result",
        }
    }
}

#[derive(Debug, Error)]
#[error("{message}")]
pub struct CliError {
    pub class: ErrorClass,
    pub message: String,
}

impl CliError {
    pub fn new(class: ErrorClass, message: impl Into<String>) -> Self {
        Self {
            class,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(ErrorClass::Usage, message)
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        Self::new(
            ErrorClass::InputFormat,
            format!("{}: {err}", path.display()),
        )
    }

    /// Prefixes the message with the file it came from.
    pub fn in_file(mut self, path: &Path) -> Self {
        self.message = format!("{}: {}", path.display(), self.message);
        self
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        let class = match e {
            FormatError::Consistency { .. } => ErrorClass::Consistency,
            FormatError::Syntax { .. } | FormatError::Json(_) => ErrorClass::InputFormat,
        };
        Self::new(class, e.to_string())
    }
}

impl From<PartitionError> for CliError {
    fn from(e: PartitionError) -> Self {
        let class = match e {
            PartitionError::EmptyInput | PartitionError::NoRetainedCells { .. } => {
                ErrorClass::EmptyResult
            }
            PartitionError::InvalidParams(_) => ErrorClass::Usage,
        };
        Self::new(class, e.to_string())
    }
}

fn eval_class(e: &EvalError) -> ErrorClass {
    match e {
        EvalError::Empty => ErrorClass::EmptyResult,
        EvalError::NotCalibratable(_) => ErrorClass::Usage,
        EvalError::Record { source, .. } => eval_class(source),
        EvalError::Selection(SelectionError::InvalidProbability(_)) => ErrorClass::Usage,
        EvalError::Misaligned { .. }
        | EvalError::MissingPasses { .. }
        | EvalError::Selection(_)
        | EvalError::Distribution(_) => ErrorClass::Consistency,
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        Self::new(eval_class(&e), e.to_string())
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        let class = match e {
            SynthError::InvalidSpec(_) => ErrorClass::Usage,
            SynthError::GridTooSmall { .. } => ErrorClass::Consistency,
        };
        Self::new(class, e.to_string())
    }
}

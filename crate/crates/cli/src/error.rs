//! Process-level error taxonomy. Every failure a command can hit maps to
//! one of four stable exit codes: 1 for I/O (including malformed input
//! files), 2 for usage, 3 for a failed check, 4 for numerical breakdown.

use std::fmt;

use zlpr::data::DataError;
use zlpr::risk::RiskError;
use zlpr::trainer::TrainError;

#[derive(Debug)]
pub enum CliError {
    Io(String),
    Usage(String),
    Check(String),
    Numerical(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Check(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io(m)
            | CliError::Usage(m)
            | CliError::Check(m)
            | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            // A specification problem is something the flags got wrong.
            DataError::Spec { .. } | DataError::TooSmall { .. } => CliError::Usage(e.to_string()),
            // Unreadable or malformed files are I/O failures.
            DataError::Io(_) | DataError::Parse { .. } | DataError::Schema { .. } => {
                CliError::Io(e.to_string())
            }
        }
    }
}

impl From<RiskError> for CliError {
    fn from(e: RiskError) -> Self {
        match e {
            RiskError::NoConvergence { .. } => CliError::Numerical(e.to_string()),
            RiskError::Loss(_) => CliError::Usage(e.to_string()),
            RiskError::DegenerateMarginal { .. } => CliError::Check(e.to_string()),
            // Everything else stems from an unreadable or malformed joint
            // file (bad masks, bad probabilities, bad normalization).
            _ => CliError::Io(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::NonFiniteLoss { .. } => CliError::Numerical(e.to_string()),
            TrainError::Io(_) | TrainError::Format(_) => CliError::Io(e.to_string()),
            // Shape disagreements between model and data are the caller
            // pointing the tool at the wrong files: usage.
            TrainError::FeatureMismatch { .. }
            | TrainError::LabelMismatch { .. }
            | TrainError::ParameterMismatch { .. }
            | TrainError::Config { .. }
            | TrainError::EmptyDataset { .. } => CliError::Usage(e.to_string()),
            TrainError::Loss(_) | TrainError::Metrics(_) | TrainError::Domain(_) => {
                CliError::Check(e.to_string())
            }
        }
    }
}

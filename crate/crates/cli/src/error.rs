use mtgnn::data::DataError;
use mtgnn::experiments::ExperimentError;
use mtgnn::gnn::{CheckpointError, GnnError};
use mtgnn::train::TrainError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("training failed: {0}")]
    Training(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Training(_) => 4,
        }
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> CliError {
        CliError::Io(format!("cannot write {}: {e}", path.display()))
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> CliError {
        CliError::Data(e.to_string())
    }
}

impl From<GnnError> for CliError {
    fn from(e: GnnError) -> CliError {
        match e {
            GnnError::InvalidConfig(_) => CliError::Config(e.to_string()),
            other => CliError::Training(other.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> CliError {
        match e {
            TrainError::Data(d) => d.into(),
            TrainError::Model(m) => m.into(),
            TrainError::InvalidConfig(_) => CliError::Config(e.to_string()),
            TrainError::TooFewRows { .. } => CliError::Data(e.to_string()),
            other => CliError::Training(other.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> CliError {
        match e {
            ExperimentError::Train(t) => t.into(),
            ExperimentError::Data(d) => d.into(),
            ExperimentError::Model(m) => m.into(),
            ExperimentError::Invalid(_) | ExperimentError::UnknownLayer(_) => {
                CliError::Config(e.to_string())
            }
            ExperimentError::Io { .. } => CliError::Io(e.to_string()),
        }
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> CliError {
        CliError::Data(e.to_string())
    }
}

//! Masked multitask loss, Adam, the plateau scheduler and the fold loop.

mod loss;
mod optim;
mod trainer;

pub use loss::{masked_loss, rmse};
pub use optim::{Adam, PlateauScheduler};
pub use trainer::{
    cross_validate, evaluate, featurize_table, fit_scalers, fold_seed, history_csv, mean_std,
    predict_rows, predictions_csv, scaled_targets, train_fold, CvOutcome, EpochRecord, Evaluation,
    FoldOutcome, FoldRun, Prediction, TrainConfig,
};

use thiserror::Error;

use crate::autodiff::AutodiffError;
use crate::data::DataError;
use crate::gnn::GnnError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("mask selects no cells")]
    EmptyMask,
    #[error("no gradient for trainable parameter {0}")]
    MissingGradient(String),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("need at least 2 training rows and 1 validation row, got {train} and {validation}")]
    TooFewRows { train: usize, validation: usize },
    #[error("loss became {loss} at epoch {epoch}")]
    Diverged { epoch: usize, loss: f64 },
    #[error(transparent)]
    Model(#[from] GnnError),
    #[error(transparent)]
    Data(#[from] DataError),
}

impl From<AutodiffError> for TrainError {
    fn from(e: AutodiffError) -> TrainError {
        match e {
            AutodiffError::EmptyMask => TrainError::EmptyMask,
            other => TrainError::Model(GnnError::Autodiff(other)),
        }
    }
}

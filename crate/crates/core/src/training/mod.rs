//! Data splits, word error rate and the training loop.

mod split;
mod trainer;
mod wer;

use thiserror::Error;

pub use split::{make_splits, SplitSpec, SplitStrategy};
pub use trainer::{
    evaluate, predict, train, Adam, EpochRecord, LabeledSet, StopReason, TrainConfig, TrainHistory, TrainOutcome,
};
pub use wer::{edit_counts, wer, EditCounts, WerReport};

use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum TrainingError {
    #[error("split: {0}")]
    Split(String),
    #[error("wer: {0}")]
    Wer(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("dataset: {0}")]
    Data(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

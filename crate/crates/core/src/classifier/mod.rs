//! Independent discriminative model: a small network trained with softmax
//! cross-entropy whose logits feed the attack and defense pipelines.

mod dataset;
mod model;
mod train;

pub use dataset::{LabeledDataset, Split};
pub use model::{cross_entropy, loss_input_gradient, softmax, ClassifierModel, Prediction};
pub use train::{accuracy, train_classifier, ClassifierConfig, ClassifierLog, ClassifierLogRow};

use crate::checkpoint::CheckpointError;
use crate::graph::GraphError;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ClassifierError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("class {class} has no training examples")]
    MissingClass { class: usize },
    #[error("example {index} has label {label}, but there are only {classes} classes")]
    Label { index: usize, label: usize, classes: usize },
    #[error("example {index} has coordinate {coord} outside [0, 1]")]
    OutOfDomain { index: usize, coord: usize },
    #[error("example {index} has {actual} inputs, expected {expected}")]
    Dimension {
        index: usize,
        expected: usize,
        actual: usize,
    },
    #[error("non-finite logit at index {index}")]
    NonFiniteLogits { index: usize },
    #[error("dataset split is empty")]
    Empty,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

impl From<CheckpointError> for ClassifierError {
    fn from(e: CheckpointError) -> Self {
        ClassifierError::Checkpoint(e.to_string())
    }
}

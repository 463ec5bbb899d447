//! Minimal dense computation graph: sequential layer stacks with reverse-mode
//! gradients with respect to both inputs and parameters, plus first-order
//! optimizers.

mod gradcheck;
mod network;
mod optim;
mod spec;

pub use gradcheck::{central_difference, finite_diff_check, GradCheckReport};
pub use network::{build_network, Evaluation, Network, ParamSet};
pub use optim::{OptimizerMode, OptimizerState, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};
pub use spec::{Layer, NetworkSpec, DEFAULT_LEAKY_SLOPE};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GraphError {
    #[error("layer {layer}: {reason}")]
    ShapeMismatch { layer: usize, reason: String },
    #[error("network spec has no layers")]
    Empty,
    #[error("input has {actual} values, network expects {expected}")]
    InputLength { expected: usize, actual: usize },
    #[error("non-finite input value at index {index}")]
    NonFiniteInput { index: usize },
    #[error("non-finite value produced by layer {layer}")]
    NonFinite { layer: usize },
    #[error("non-finite gradient produced by layer {layer}")]
    NonFiniteGradient { layer: usize },
    #[error("network has {outputs} outputs; a cotangent of that length is required")]
    MissingCotangent { outputs: usize },
    #[error("parameter tensor {index} has shape {actual:?}, expected {expected:?}")]
    ParamShape {
        index: usize,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },
    #[error("expected {expected} parameter tensors, got {actual}")]
    ParamCount { expected: usize, actual: usize },
    #[error("learning rate must be positive, got {0}")]
    LearningRate(f64),
    #[error("non-finite gradient entry in tensor {tensor}")]
    NonFiniteUpdate { tensor: usize },
    #[error("cannot parse layer `{0}`")]
    Parse(String),
}

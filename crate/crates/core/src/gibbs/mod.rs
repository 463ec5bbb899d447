//! Energy-based model semantics: Gibbs densities, Langevin chains, the
//! persistent replay buffer and contrastive training.

mod buffer;
mod contrastive;
mod model;
mod partition;
mod sgld;
mod train;

pub use buffer::{BufferDraw, ReplayBuffer, DEFAULT_BUFFER_CAPACITY};
pub use contrastive::{contrastive_gradient, ContrastiveGradient};
pub use model::{DomainBox, Energy, EnergyModel, FnEnergy, ModelLoadError, Quadratic};
pub use partition::{brute_force_partition, brute_force_partition_with, PartitionTable};
pub use sgld::{sgld_chain, sgld_trajectory, SgldConfig};
pub use train::{train_ebm, OptimizerPhase, TrainConfig, TrainLog, TrainLogRow};

use crate::graph::GraphError;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GibbsError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("non-finite gradient at SGLD step {step}")]
    NonFiniteGradient { step: usize },
    #[error("point has {actual} coordinates, expected {expected}")]
    Dimension { expected: usize, actual: usize },
    #[error("coordinate {index} lies outside the model domain")]
    OutOfDomain { index: usize },
    #[error("{batch} batch is empty")]
    EmptyBatch { batch: &'static str },
    #[error("non-finite energy for {batch} batch element {index}")]
    NonFiniteEnergy { batch: &'static str, index: usize },
    #[error("batch of {batch} exceeds buffer capacity {capacity}")]
    BatchTooLarge { batch: usize, capacity: usize },
    #[error("brute-force partition supports at most 2 dimensions, got {0}")]
    DimensionTooLarge(usize),
    #[error(
        "training diverged at batch {batch}: data energy {data_energy}, sample energy {sample_energy} \
         (gap exceeds {bound})"
    )]
    Diverged {
        batch: usize,
        data_energy: f64,
        sample_energy: f64,
        bound: f64,
    },
}

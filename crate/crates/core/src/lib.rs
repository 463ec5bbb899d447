//! Energy-based models trained with persistent Langevin chains, evaluated by
//! the stochastic security they confer on an independent classifier, and a
//! spectral Fokker-Planck solver used as an exact reference sampler.
//!
//! The numerical modules are generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`, which is what the experiment
//! harness uses throughout.

// `!(x > 0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversarial;
pub mod checkpoint;
pub mod classifier;
pub mod fpe;
pub mod gibbs;
pub mod graph;
pub mod harness;
pub mod io_util;
pub mod metrics;
pub mod rng;
pub mod scalar;
pub mod tensor;

pub use scalar::Real;

pub type Tensor64 = tensor::Tensor<f64>;
pub type Network64 = graph::Network<f64>;
pub type ParamSet64 = graph::ParamSet<f64>;
pub type EnergyModel64 = gibbs::EnergyModel<f64>;
pub type SgldConfig64 = gibbs::SgldConfig<f64>;
pub type TrainConfig64 = gibbs::TrainConfig<f64>;
pub type PeriodicLattice64 = fpe::PeriodicLattice<f64>;
pub type DensityField64 = fpe::DensityField<f64>;
pub type PotentialField64 = fpe::PotentialField<f64>;
pub type ClassifierModel64 = classifier::ClassifierModel<f64>;
pub type LabeledDataset64 = classifier::LabeledDataset<f64>;
pub type AttackConfig64 = adversarial::AttackConfig<f64>;
pub type DefenseConfig64 = adversarial::DefenseConfig<f64>;

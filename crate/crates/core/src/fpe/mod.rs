//! Classical reference Gibbs sampler: the Fokker-Planck generator discretized
//! with Fourier derivatives on a periodic lattice, integrated to stationarity
//! and compared against Langevin chains.
//!
//! Potentials are stored dimensionless (`beta` already folded in), so the
//! generator is written at unit temperature.

mod compare;
mod generator;
mod lattice;
mod periodize;
mod spectral;

pub use compare::{
    compare_sampler, histogram_on_lattice, total_variation, ArccosLift, CompareConfig, SamplerComparison,
};
pub use generator::{apply_generator, evolve, stable_time_step, EvolveOutcome, Generator, STABILITY_CONSTANT};
pub use lattice::{DensityField, PeriodicLattice, PotentialField};
pub use periodize::periodize_arccos;
pub use spectral::{fourier_derivative, SpectralOps};

use crate::gibbs::GibbsError;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SpectralError {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),
    #[error("axis {axis} is not declared periodic")]
    NonPeriodic { axis: usize },
    #[error("field has {actual} values, lattice has {expected} points")]
    FieldLength { expected: usize, actual: usize },
    #[error("fields live on different lattices")]
    LatticeMismatch,
    #[error("imaginary residue {residue:e} after inverse transform")]
    ImaginaryResidue { residue: f64 },
    #[error("potential spread {spread} overflows exp(); rescale the potential or lower beta")]
    Overflow { spread: f64 },
    #[error("time step {dt} exceeds the stability bound {bound}")]
    UnstableStep { dt: f64, bound: f64 },
    #[error("density went negative ({value:e}) at step {step}")]
    NegativeDensity { step: usize, value: f64 },
    #[error("non-finite value in field at index {index}")]
    NonFinite { index: usize },
    #[error("sampler comparison needs at least one chain")]
    EmptyChains,
    #[error(transparent)]
    Gibbs(#[from] GibbsError),
}

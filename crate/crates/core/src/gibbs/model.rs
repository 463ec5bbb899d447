use rand::Rng;

use super::GibbsError;
use crate::checkpoint::{Checkpoint, CheckpointError};
use crate::graph::{GraphError, Network, NetworkSpec, ParamSet};
use crate::scalar::Real;
use crate::tensor::Tensor;

/// A differentiable potential `E: R^d -> R`.
pub trait Energy<T: Real>: Sync {
    fn dim(&self) -> usize;

    fn energy(&self, x: &[T]) -> Result<T, GibbsError>;

    /// Writes `grad E(x)` into `grad` and returns `E(x)`.
    fn energy_grad(&self, x: &[T], grad: &mut [T]) -> Result<T, GibbsError>;

    /// Box the potential is defined on, when it has one.
    fn domain(&self) -> Option<&DomainBox<T>> {
        None
    }
}

/// Axis-aligned box `[lo_i, hi_i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainBox<T> {
    lo: Vec<T>,
    hi: Vec<T>,
}

impl<T: Real> DomainBox<T> {
    pub fn new(lo: Vec<T>, hi: Vec<T>) -> Result<Self, GibbsError> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(GibbsError::Config(
                "domain bounds must be non-empty and equal length".into(),
            ));
        }
        if let Some(i) = lo.iter().zip(&hi).position(|(l, h)| !(l < h)) {
            return Err(GibbsError::Config(format!("domain axis {i} has lo >= hi")));
        }
        Ok(Self { lo, hi })
    }

    /// `[0, 1]^dim`.
    pub fn unit(dim: usize) -> Self {
        Self::uniform_bounds(dim, T::zero(), T::one())
    }

    pub fn uniform_bounds(dim: usize, lo: T, hi: T) -> Self {
        Self {
            lo: vec![lo; dim],
            hi: vec![hi; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[T] {
        &self.lo
    }

    pub fn hi(&self) -> &[T] {
        &self.hi
    }

    pub fn volume(&self) -> T {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| *h - *l)
            .fold(T::one(), |a, b| a * b)
    }

    /// Index of the first coordinate outside the box.
    pub fn violation(&self, x: &[T]) -> Option<usize> {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .position(|(v, (l, h))| !(*v >= *l && *v <= *h))
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.len() == self.dim() && self.violation(x).is_none()
    }

    pub fn clamp(&self, x: &mut [T]) {
        for (v, (l, h)) in x.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            *v = v.max(*l).min(*h);
        }
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| {
                let u: f64 = rng.random();
                let v = *l + (*h - *l) * T::lit(u);
                v.min(*h)
            })
            .collect()
    }
}

/// Neural energy `E_theta` with inverse temperature `beta` on a box domain.
#[derive(Debug, Clone)]
pub struct EnergyModel<T> {
    network: Network<T>,
    beta: T,
    domain: DomainBox<T>,
}

impl<T: Real> EnergyModel<T> {
    pub fn new(network: Network<T>, beta: T, domain: DomainBox<T>) -> Result<Self, GibbsError> {
        if network.output_len() != 1 {
            return Err(GibbsError::Config(format!(
                "energy network must output a scalar, got {} outputs",
                network.output_len()
            )));
        }
        if !(beta > T::zero()) || !beta.is_finite() {
            return Err(GibbsError::Config(format!(
                "beta must be positive and finite, got {beta}"
            )));
        }
        if domain.dim() != network.input_len() {
            return Err(GibbsError::Dimension {
                expected: network.input_len(),
                actual: domain.dim(),
            });
        }
        Ok(Self { network, beta, domain })
    }

    pub fn network(&self) -> &Network<T> {
        &self.network
    }

    pub fn network_mut(&mut self) -> &mut Network<T> {
        &mut self.network
    }

    pub fn params(&self) -> &ParamSet<T> {
        self.network.params()
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<T> {
        self.network.params_mut()
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    pub fn bounds(&self) -> &DomainBox<T> {
        &self.domain
    }

    /// Unnormalized Gibbs density `exp(-beta E(x))`.
    pub fn unnormalized_density(&self, x: &[T]) -> Result<T, GibbsError> {
        Ok((-self.beta * self.energy(x)?).exp())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new();
        ck.push_scalar("meta.beta", self.beta.to_f64_lossy());
        ck.push("meta.domain_lo", &Tensor::from_vec(self.domain.lo.clone()));
        ck.push("meta.domain_hi", &Tensor::from_vec(self.domain.hi.clone()));
        ck.push_params("energy.", self.network.params());
        ck
    }

    pub fn from_checkpoint(spec: NetworkSpec, ck: &Checkpoint) -> Result<Self, ModelLoadError> {
        let template = ParamSet::<T>::zeros_for(&spec);
        let params = ck.params("energy.", &template)?;
        let network = Network::new(spec, params)?;
        let beta = T::lit(ck.scalar("meta.beta")?);
        let lo = ck.get("meta.domain_lo")?.cast::<T>().into_values();
        let hi = ck.get("meta.domain_hi")?.cast::<T>().into_values();
        Ok(Self::new(network, beta, DomainBox::new(lo, hi)?)?)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ModelLoadError {
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Gibbs(#[from] GibbsError),
}

impl<T: Real> Energy<T> for EnergyModel<T> {
    fn dim(&self) -> usize {
        self.network.input_len()
    }

    fn energy(&self, x: &[T]) -> Result<T, GibbsError> {
        Ok(self.network.forward(x)?[0])
    }

    fn energy_grad(&self, x: &[T], grad: &mut [T]) -> Result<T, GibbsError> {
        let (out, g) = self.network.input_gradient(x, None)?;
        grad.copy_from_slice(&g);
        Ok(out[0])
    }

    fn domain(&self) -> Option<&DomainBox<T>> {
        Some(&self.domain)
    }
}

/// `E(x) = stiffness/2 * |x - center|^2`, optionally restricted to a box.
#[derive(Debug, Clone)]
pub struct Quadratic<T> {
    pub center: Vec<T>,
    pub stiffness: T,
    pub domain: Option<DomainBox<T>>,
}

impl<T: Real> Quadratic<T> {
    pub fn new(center: Vec<T>, stiffness: T) -> Self {
        Self {
            center,
            stiffness,
            domain: None,
        }
    }
}

impl<T: Real> Energy<T> for Quadratic<T> {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn energy(&self, x: &[T]) -> Result<T, GibbsError> {
        let sq: T = x.iter().zip(&self.center).map(|(a, c)| (*a - *c) * (*a - *c)).sum();
        Ok(self.stiffness * sq / T::lit(2.0))
    }

    fn energy_grad(&self, x: &[T], grad: &mut [T]) -> Result<T, GibbsError> {
        for ((g, a), c) in grad.iter_mut().zip(x).zip(&self.center) {
            *g = self.stiffness * (*a - *c);
        }
        self.energy(x)
    }

    fn domain(&self) -> Option<&DomainBox<T>> {
        self.domain.as_ref()
    }
}

/// Potential given by a closure that fills the gradient and returns the energy.
pub struct FnEnergy<T, F> {
    dim: usize,
    f: F,
    domain: Option<DomainBox<T>>,
}

impl<T: Real, F> FnEnergy<T, F>
where
    F: Fn(&[T], &mut [T]) -> T + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f, domain: None }
    }

    pub fn with_domain(mut self, domain: DomainBox<T>) -> Self {
        self.domain = Some(domain);
        self
    }
}

impl<T: Real, F> Energy<T> for FnEnergy<T, F>
where
    F: Fn(&[T], &mut [T]) -> T + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn energy(&self, x: &[T]) -> Result<T, GibbsError> {
        let mut scratch = vec![T::zero(); self.dim];
        Ok((self.f)(x, &mut scratch))
    }

    fn energy_grad(&self, x: &[T], grad: &mut [T]) -> Result<T, GibbsError> {
        Ok((self.f)(x, grad))
    }

    fn domain(&self) -> Option<&DomainBox<T>> {
        self.domain.as_ref()
    }
}

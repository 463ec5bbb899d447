//! Langevin chains versus the spectral stationary density.
//!
//! Only arccos-lifted potentials are compared: chains run unclamped in angle
//! space, where the lifted potential is smooth and periodic, so no boundary
//! rule is needed on either side. Box-clamped chains have no periodic
//! counterpart and are not handled here.

use rand::Rng;
use rayon::prelude::*;

use super::{evolve, stable_time_step, DensityField, PeriodicLattice, PotentialField, SpectralError};
use crate::gibbs::{sgld_chain, DomainBox, Energy, GibbsError, SgldConfig};
use crate::rng::stream;
use crate::scalar::Real;

/// `phi -> E(cos phi)` with the chain-rule gradient `-sin(phi_i) dE/dx_i`.
pub struct ArccosLift<'a, E: ?Sized> {
    inner: &'a E,
}

impl<'a, E: ?Sized> ArccosLift<'a, E> {
    pub fn new(inner: &'a E) -> Self {
        Self { inner }
    }
}

impl<T: Real, E: Energy<T> + ?Sized> Energy<T> for ArccosLift<'_, E> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn energy(&self, phi: &[T]) -> Result<T, GibbsError> {
        let x: Vec<T> = phi.iter().map(|p| p.cos()).collect();
        self.inner.energy(&x)
    }

    fn energy_grad(&self, phi: &[T], grad: &mut [T]) -> Result<T, GibbsError> {
        let x: Vec<T> = phi.iter().map(|p| p.cos()).collect();
        let e = self.inner.energy_grad(&x, grad)?;
        for (g, p) in grad.iter_mut().zip(phi) {
            *g *= -p.sin();
        }
        Ok(e)
    }

    fn domain(&self) -> Option<&DomainBox<T>> {
        None
    }
}

#[derive(Debug, Clone)]
pub struct CompareConfig<T> {
    pub chains: usize,
    /// Chain settings; clamping is ignored, chains always run unclamped.
    pub sgld: SgldConfig<T>,
    /// Integration time for the spectral reference started from uniform.
    pub relax_time: T,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SamplerComparison<T> {
    pub total_variation: T,
    /// Fraction of chain end-states nearest to each lattice point.
    pub histogram: Vec<T>,
    pub stationary: DensityField<T>,
}

/// Fraction of `points` whose nearest lattice point (with wrap-around) is each
/// lattice index.
pub fn histogram_on_lattice<T: Real>(lattice: &PeriodicLattice<T>, points: &[Vec<T>]) -> Vec<T> {
    let n = lattice.points();
    let h = lattice.spacing();
    let mut counts = vec![0usize; lattice.len()];
    for p in points {
        let idx: Vec<usize> = p
            .iter()
            .map(|c| {
                let k = (*c / h).round().to_i64().unwrap_or(0);
                k.rem_euclid(n as i64) as usize
            })
            .collect();
        counts[lattice.flat(&idx)] += 1;
    }
    let total = T::from_usize_lossy(points.len().max(1));
    counts.into_iter().map(|c| T::from_usize_lossy(c) / total).collect()
}

/// `1/2 sum |p - q|` over matching categories.
pub fn total_variation<T: Real>(p: &[T], q: &[T]) -> T {
    p.iter().zip(q).map(|(a, b)| (*a - *b).abs()).sum::<T>() / T::lit(2.0)
}

/// Runs `cfg.chains` Langevin chains on the arccos lift of `energy`, started
/// uniformly on the torus, and returns the total-variation distance between
/// their end-state histogram and the density obtained by evolving a uniform
/// start under `potential`.
///
/// The chains sample `exp(-beta_s E)` with `beta_s = 2 alpha / sigma^2`, so
/// `potential` must already carry the matching factor for the two to agree.
pub fn compare_sampler<T, E>(
    energy: &E,
    potential: &PotentialField<T>,
    cfg: &CompareConfig<T>,
) -> Result<SamplerComparison<T>, SpectralError>
where
    T: Real,
    E: Energy<T> + ?Sized,
{
    if cfg.chains == 0 {
        return Err(SpectralError::EmptyChains);
    }
    let lattice = potential.lattice();
    if energy.dim() != lattice.dim() {
        return Err(SpectralError::Gibbs(GibbsError::Dimension {
            expected: lattice.dim(),
            actual: energy.dim(),
        }));
    }
    let dt = stable_time_step(potential)?;
    let stationary = evolve(&DensityField::uniform(lattice.clone()), potential, cfg.relax_time, dt)?.density;

    let mut sgld = cfg.sgld.clone();
    sgld.clamp = false;
    let lift = ArccosLift::new(energy);
    let tau = T::TAU();
    let ends = (0..cfg.chains)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(cfg.seed, "compare-chain", &[c as u64]);
            let x0: Vec<T> = (0..lattice.dim()).map(|_| T::lit(rng.random::<f64>()) * tau).collect();
            let end = sgld_chain(&lift, &x0, &sgld, &mut rng)?;
            Ok(end.into_iter().map(|p| p - (p / tau).floor() * tau).collect())
        })
        .collect::<Result<Vec<Vec<T>>, GibbsError>>()?;
    let histogram = histogram_on_lattice(lattice, &ends);
    let total_variation = total_variation(&histogram, &stationary.cell_probabilities());
    Ok(SamplerComparison {
        total_variation,
        histogram,
        stationary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fpe::periodize_arccos;
    use crate::gibbs::FnEnergy;
    use rand::distr::{weighted::WeightedIndex, Distribution};
    use rand::SeedableRng;

    #[test]
    fn lift_gradient_matches_finite_difference() {
        let e = FnEnergy::new(2, |x: &[f64], g: &mut [f64]| {
            g[0] = 2.0 * x[0] + x[1];
            g[1] = x[0];
            x[0] * x[0] + x[0] * x[1]
        });
        let lift = ArccosLift::new(&e);
        let phi = [0.7, 2.3];
        let mut g = [0.0; 2];
        lift.energy_grad(&phi, &mut g).unwrap();
        for i in 0..2 {
            let mut a = phi;
            let mut b = phi;
            a[i] += 1e-6;
            b[i] -= 1e-6;
            let fd = (lift.energy(&a).unwrap() - lift.energy(&b).unwrap()) / 2e-6;
            assert!((fd - g[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn histogram_wraps_to_nearest_point() {
        let l = PeriodicLattice::<f64>::new(1, 8, 8.0).unwrap();
        let h = histogram_on_lattice(&l, &[vec![7.6], vec![0.2], vec![3.4], vec![2.6]]);
        assert_eq!(h, vec![0.5, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn exact_categorical_draws_are_close() {
        let l = PeriodicLattice::<f64>::torus(1, 32).unwrap();
        let p = periodize_arccos(&l, |x| 1.5 * x[0] - x[0] * x[0]).unwrap();
        let g = DensityField::gibbs(&p).cell_probabilities();
        let dist = WeightedIndex::new(&g).unwrap();
        let chains = 20_000;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<Vec<f64>> = (0..chains).map(|_| vec![l.coordinate(dist.sample(&mut rng))]).collect();
        let tv = total_variation(&histogram_on_lattice(&l, &pts), &g);
        assert!(tv < 3.0 * (32.0f64 / chains as f64).sqrt(), "{tv}");
    }

    #[test]
    fn zero_chains_rejected() {
        let l = PeriodicLattice::<f64>::torus(1, 16).unwrap();
        let p = periodize_arccos(&l, |x| x[0]).unwrap();
        let e = FnEnergy::new(1, |x: &[f64], g: &mut [f64]| {
            g[0] = 1.0;
            x[0]
        });
        let cfg = CompareConfig {
            chains: 0,
            sgld: SgldConfig::new(10, 0.01, 0.1),
            relax_time: 1.0,
            seed: 0,
        };
        assert_eq!(compare_sampler(&e, &p, &cfg).unwrap_err(), SpectralError::EmptyChains);
    }
}

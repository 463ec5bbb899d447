use super::{DomainBox, Energy, EnergyModel, GibbsError};
use crate::scalar::Real;

/// Lattice quadrature of the Gibbs density on a box of dimension 1 or 2.
#[derive(Debug, Clone)]
pub struct PartitionTable<T> {
    /// Grid coordinates per axis (`resolution` points including both ends).
    pub axes: Vec<Vec<T>>,
    /// Trapezoidal quadrature weight of every lattice point (row-major).
    pub weights: Vec<T>,
    /// Normalized density `exp(-beta E) / Z` at every lattice point.
    pub density: Vec<T>,
    pub log_z: T,
}

impl<T: Real> PartitionTable<T> {
    pub fn z(&self) -> T {
        self.log_z.exp()
    }

    /// Probability mass carried by each lattice point (`weight * density`),
    /// summing to one.
    pub fn probabilities(&self) -> Vec<T> {
        self.weights.iter().zip(&self.density).map(|(w, p)| *w * *p).collect()
    }

    pub fn point(&self, flat: usize) -> Vec<T> {
        match self.axes.len() {
            1 => vec![self.axes[0][flat]],
            _ => {
                let n1 = self.axes[1].len();
                vec![self.axes[0][flat / n1], self.axes[1][flat % n1]]
            }
        }
    }

    pub fn len(&self) -> usize {
        self.density.len()
    }

    pub fn is_empty(&self) -> bool {
        self.density.is_empty()
    }
}

/// Brute-force partition function of `model` on its own domain.
pub fn brute_force_partition<T: Real>(
    model: &EnergyModel<T>,
    resolution: usize,
) -> Result<PartitionTable<T>, GibbsError> {
    brute_force_partition_with(model, model.beta(), model.bounds(), resolution)
}

/// Trapezoidal quadrature of `exp(-beta E)` on a `resolution^d` lattice.
pub fn brute_force_partition_with<T, E>(
    energy: &E,
    beta: T,
    domain: &DomainBox<T>,
    resolution: usize,
) -> Result<PartitionTable<T>, GibbsError>
where
    T: Real,
    E: Energy<T> + ?Sized,
{
    let dim = domain.dim();
    if dim > 2 {
        return Err(GibbsError::DimensionTooLarge(dim));
    }
    if resolution < 2 {
        return Err(GibbsError::Config("lattice resolution must be at least 2".into()));
    }
    if energy.dim() != dim {
        return Err(GibbsError::Dimension {
            expected: energy.dim(),
            actual: dim,
        });
    }
    let last = T::from_usize_lossy(resolution - 1);
    let mut axes = Vec::with_capacity(dim);
    let mut axis_weights = Vec::with_capacity(dim);
    for a in 0..dim {
        let (lo, hi) = (domain.lo()[a], domain.hi()[a]);
        let h = (hi - lo) / last;
        axes.push(
            (0..resolution)
                .map(|i| {
                    if i + 1 == resolution {
                        hi
                    } else {
                        lo + h * T::from_usize_lossy(i)
                    }
                })
                .collect::<Vec<_>>(),
        );
        axis_weights.push(
            (0..resolution)
                .map(|i| {
                    if i == 0 || i + 1 == resolution {
                        h / T::lit(2.0)
                    } else {
                        h
                    }
                })
                .collect::<Vec<_>>(),
        );
    }
    let total = resolution.pow(dim as u32);
    let mut energies = Vec::with_capacity(total);
    let mut weights = Vec::with_capacity(total);
    let mut point = vec![T::zero(); dim];
    for flat in 0..total {
        let mut w = T::one();
        let mut rem = flat;
        for a in (0..dim).rev() {
            let i = rem % resolution;
            rem /= resolution;
            point[a] = axes[a][i];
            w *= axis_weights[a][i];
        }
        let e = energy.energy(&point)?;
        if !e.is_finite() {
            return Err(GibbsError::NonFiniteEnergy {
                batch: "lattice",
                index: flat,
            });
        }
        energies.push(beta * e);
        weights.push(w);
    }
    let min = energies.iter().copied().fold(T::infinity(), T::min);
    let unnorm: Vec<T> = energies.iter().map(|e| (min - *e).exp()).collect();
    let mass: T = unnorm.iter().zip(&weights).map(|(u, w)| *u * *w).sum();
    let log_z = mass.ln() - min;
    let density = unnorm.iter().map(|u| *u / mass).collect();
    Ok(PartitionTable {
        axes,
        weights,
        density,
        log_z,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{FnEnergy, Quadratic};
    use super::*;

    fn linear_1d(slope: f64) -> impl Energy<f64> {
        FnEnergy::new(1, move |x: &[f64], g: &mut [f64]| {
            g[0] = slope;
            slope * x[0]
        })
    }

    #[test]
    fn zero_energy_gives_unit_z_and_uniform_density() {
        let t = brute_force_partition_with(&linear_1d(0.0), 1.0, &DomainBox::unit(1), 101).unwrap();
        assert!((t.z() - 1.0).abs() < 1e-14);
        assert!(t.density.iter().all(|p| (p - 1.0).abs() < 1e-14));
        let total: f64 = t.probabilities().iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn linear_energy_matches_closed_form() {
        // Z = int_0^1 e^{-x} dx = 1 - e^{-1}
        let t = brute_force_partition_with(&linear_1d(1.0), 1.0, &DomainBox::unit(1), 20_001).unwrap();
        assert!((t.z() - (1.0 - (-1.0f64).exp())).abs() < 1e-9, "{}", t.z());
    }

    #[test]
    fn quadrature_converges_under_refinement() {
        let e = Quadratic::<f64>::new(vec![0.3, 0.6], 4.0);
        let d = DomainBox::unit(2);
        let coarse = brute_force_partition_with(&e, 1.0, &d, 1001).unwrap();
        let fine = brute_force_partition_with(&e, 1.0, &d, 2001).unwrap();
        assert!((coarse.z() - fine.z()).abs() < 1e-6);
        let total: f64 = fine.probabilities().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_three_dimensions() {
        let e = Quadratic::new(vec![0.0; 3], 1.0);
        assert_eq!(
            brute_force_partition_with(&e, 1.0, &DomainBox::unit(3), 4).unwrap_err(),
            GibbsError::DimensionTooLarge(3)
        );
    }
}

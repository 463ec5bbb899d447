use super::SpectralError;
use crate::checkpoint::Checkpoint;
use crate::scalar::{first_non_finite, Real};
use crate::tensor::Tensor;

/// Regular lattice of `points^dim` equidistant points on a torus of side `period`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicLattice<T> {
    dim: usize,
    points: usize,
    period: T,
    periodic: Vec<bool>,
}

impl<T: Real> PeriodicLattice<T> {
    pub fn new(dim: usize, points: usize, period: T) -> Result<Self, SpectralError> {
        if !(1..=2).contains(&dim) {
            return Err(SpectralError::InvalidLattice(format!("dimension {dim} outside 1..=2")));
        }
        if points < 8 || !points.is_multiple_of(2) {
            return Err(SpectralError::InvalidLattice(format!(
                "points per axis must be even and at least 8, got {points}"
            )));
        }
        if !(period > T::zero()) || !period.is_finite() {
            return Err(SpectralError::InvalidLattice(format!(
                "period must be positive, got {period}"
            )));
        }
        Ok(Self {
            dim,
            points,
            period,
            periodic: vec![true; dim],
        })
    }

    /// Lattice on `[0, 2 pi)^dim`.
    pub fn torus(dim: usize, points: usize) -> Result<Self, SpectralError> {
        Self::new(dim, points, T::TAU())
    }

    /// Marks `axis` as non-periodic; spectral derivatives along it are refused.
    pub fn declare_open(mut self, axis: usize) -> Self {
        if axis < self.dim {
            self.periodic[axis] = false;
        }
        self
    }

    pub fn is_periodic(&self, axis: usize) -> bool {
        self.periodic.get(axis).copied().unwrap_or(false)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn period(&self) -> T {
        self.period
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> T {
        self.period / T::from_usize_lossy(self.points)
    }

    pub fn cell_volume(&self) -> T {
        self.spacing().powi(self.dim as i32)
    }

    /// Largest resolved angular wavenumber `pi N / L`.
    pub fn max_wavenumber(&self) -> T {
        T::PI() * T::from_usize_lossy(self.points) / self.period
    }

    /// Per-axis indices of a flat row-major index.
    pub fn indices(&self, flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim];
        let mut rem = flat;
        for a in (0..self.dim).rev() {
            idx[a] = rem % self.points;
            rem /= self.points;
        }
        idx
    }

    pub fn flat(&self, indices: &[usize]) -> usize {
        indices.iter().fold(0, |acc, &i| acc * self.points + i)
    }

    pub fn coordinate(&self, index: usize) -> T {
        self.spacing() * T::from_usize_lossy(index)
    }

    pub fn point(&self, flat: usize) -> Vec<T> {
        self.indices(flat).into_iter().map(|i| self.coordinate(i)).collect()
    }

    /// Cell-volume-weighted sum.
    pub fn integrate(&self, values: &[T]) -> T {
        values.iter().copied().sum::<T>() * self.cell_volume()
    }

    pub(crate) fn check_field(&self, values: &[T]) -> Result<(), SpectralError> {
        if values.len() != self.len() {
            return Err(SpectralError::FieldLength {
                expected: self.len(),
                actual: values.len(),
            });
        }
        if let Some(index) = first_non_finite(values) {
            return Err(SpectralError::NonFinite { index });
        }
        Ok(())
    }
}

/// Probability density sampled on a lattice; integrates to one.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField<T> {
    lattice: PeriodicLattice<T>,
    values: Vec<T>,
}

impl<T: Real> DensityField<T> {
    /// Rescales non-negative `values` to unit mass.
    pub fn normalized(lattice: PeriodicLattice<T>, mut values: Vec<T>) -> Result<Self, SpectralError> {
        lattice.check_field(&values)?;
        if let Some(v) = values.iter().find(|v| **v < T::zero()) {
            return Err(SpectralError::NegativeDensity {
                step: 0,
                value: v.to_f64_lossy(),
            });
        }
        let mass = lattice.integrate(&values);
        if !(mass > T::zero()) {
            return Err(SpectralError::InvalidLattice("density has zero mass".into()));
        }
        values.iter_mut().for_each(|v| *v /= mass);
        Ok(Self { lattice, values })
    }

    pub fn uniform(lattice: PeriodicLattice<T>) -> Self {
        let v = T::one() / lattice.period().powi(lattice.dim() as i32);
        let values = vec![v; lattice.len()];
        Self { lattice, values }
    }

    /// Exact lattice Gibbs density `exp(-Ebar) / Z`.
    pub fn gibbs(potential: &PotentialField<T>) -> Self {
        let min = potential.values.iter().copied().fold(T::infinity(), T::min);
        let values = potential.values.iter().map(|e| (min - *e).exp()).collect();
        Self::normalized(potential.lattice.clone(), values).expect("Gibbs weights are positive")
    }

    pub(crate) fn from_raw(lattice: PeriodicLattice<T>, values: Vec<T>) -> Self {
        Self { lattice, values }
    }

    pub fn lattice(&self) -> &PeriodicLattice<T> {
        &self.lattice
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn mass(&self) -> T {
        self.lattice.integrate(&self.values)
    }

    /// Probability carried by each lattice point.
    pub fn cell_probabilities(&self) -> Vec<T> {
        let dv = self.lattice.cell_volume();
        self.values.iter().map(|v| *v * dv).collect()
    }

    /// Lattice L2 distance `sqrt(sum (a - b)^2 dV)`.
    pub fn l2_distance(&self, other: &Self) -> T {
        let sq: T = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (*a - *b) * (*a - *b))
            .sum();
        (sq * self.lattice.cell_volume()).sqrt()
    }
}

/// Dimensionless potential `Ebar = beta E` sampled on a lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialField<T> {
    lattice: PeriodicLattice<T>,
    values: Vec<T>,
}

impl<T: Real> PotentialField<T> {
    pub fn new(lattice: PeriodicLattice<T>, values: Vec<T>) -> Result<Self, SpectralError> {
        lattice.check_field(&values)?;
        Ok(Self { lattice, values })
    }

    /// Samples `f` at every lattice point.
    pub fn from_fn<F: Fn(&[T]) -> T>(lattice: PeriodicLattice<T>, f: F) -> Result<Self, SpectralError> {
        let values = (0..lattice.len()).map(|i| f(&lattice.point(i))).collect();
        Self::new(lattice, values)
    }

    /// Multiplies every value by `beta`.
    pub fn scaled(mut self, beta: T) -> Self {
        self.values.iter_mut().for_each(|v| *v *= beta);
        self
    }

    pub fn lattice(&self) -> &PeriodicLattice<T> {
        &self.lattice
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }
}

/// Stores `values` under `{name}.values` (shape `N x .. x N`) with the
/// period and per-axis periodic flags alongside.
fn push_field<T: Real>(ck: &mut Checkpoint, name: &str, lattice: &PeriodicLattice<T>, values: &[T]) {
    let shape = vec![lattice.points(); lattice.dim()];
    let tensor = Tensor::new(shape, values.to_vec()).expect("field length matches lattice");
    ck.push(format!("{name}.values"), &tensor);
    ck.push_scalar(format!("{name}.period"), lattice.period().to_f64_lossy());
    let flags: Vec<f64> = lattice.periodic.iter().map(|p| if *p { 1.0 } else { 0.0 }).collect();
    ck.push(format!("{name}.periodic"), &Tensor::from_vec(flags));
}

fn read_field<T: Real>(ck: &Checkpoint, name: &str) -> Result<(PeriodicLattice<T>, Vec<T>), SpectralError> {
    let bad = |e: crate::checkpoint::CheckpointError| SpectralError::InvalidLattice(e.to_string());
    let values = ck.get(&format!("{name}.values")).map_err(bad)?;
    let period = ck.scalar(&format!("{name}.period")).map_err(bad)?;
    let flags = ck.get(&format!("{name}.periodic")).map_err(bad)?;
    let shape = values.shape();
    let mut lattice = PeriodicLattice::new(shape.len(), shape[0], T::lit(period))?;
    if shape.iter().any(|s| *s != shape[0]) || flags.values().len() != shape.len() {
        return Err(SpectralError::InvalidLattice(format!(
            "field {name} has shape {shape:?}"
        )));
    }
    for (axis, f) in flags.values().iter().enumerate() {
        if *f == 0.0 {
            lattice = lattice.declare_open(axis);
        }
    }
    let cast = values.values().iter().map(|v| T::lit(*v)).collect();
    Ok((lattice, cast))
}

impl<T: Real> DensityField<T> {
    pub fn push_to(&self, ck: &mut Checkpoint, name: &str) {
        push_field(ck, name, &self.lattice, &self.values);
    }

    /// Reads a density and renormalizes it, absorbing storage rounding.
    pub fn read_from(ck: &Checkpoint, name: &str) -> Result<Self, SpectralError> {
        let (lattice, values) = read_field(ck, name)?;
        Self::normalized(lattice, values)
    }
}

impl<T: Real> PotentialField<T> {
    pub fn push_to(&self, ck: &mut Checkpoint, name: &str) {
        push_field(ck, name, &self.lattice, &self.values);
    }

    pub fn read_from(ck: &Checkpoint, name: &str) -> Result<Self, SpectralError> {
        let (lattice, values) = read_field(ck, name)?;
        Self::new(lattice, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_validation() {
        assert!(PeriodicLattice::<f64>::new(1, 7, 1.0).is_err());
        assert!(PeriodicLattice::<f64>::new(1, 6, 1.0).is_err());
        assert!(PeriodicLattice::<f64>::new(3, 8, 1.0).is_err());
        assert!(PeriodicLattice::<f64>::new(1, 8, 0.0).is_err());
        let l = PeriodicLattice::<f64>::new(2, 8, 2.0).unwrap();
        assert_eq!(l.len(), 64);
        assert_eq!(l.indices(l.flat(&[3, 5])), vec![3, 5]);
        assert_eq!(l.cell_volume(), 0.0625);
    }

    #[test]
    fn gibbs_density_has_unit_mass() {
        let l = PeriodicLattice::<f64>::torus(2, 16).unwrap();
        let p = PotentialField::from_fn(l, |x| x[0].cos() + 0.5 * x[1].sin()).unwrap();
        let g = DensityField::gibbs(&p);
        assert!((g.mass() - 1.0).abs() < 1e-12);
        assert!((DensityField::uniform(p.lattice().clone()).mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fields_round_trip_through_checkpoints() {
        let l = PeriodicLattice::<f64>::torus(2, 8).unwrap().declare_open(1);
        let p = PotentialField::from_fn(l, |x| x[0].sin() * x[1]).unwrap();
        let g = DensityField::gibbs(&p);
        let mut ck = Checkpoint::new();
        p.push_to(&mut ck, "potential");
        g.push_to(&mut ck, "density");
        let back = Checkpoint::from_bytes(&ck.to_bytes()).unwrap();
        assert_eq!(PotentialField::<f64>::read_from(&back, "potential").unwrap(), p);
        let g2 = DensityField::<f64>::read_from(&back, "density").unwrap();
        assert!(!g2.lattice().is_periodic(1));
        for (a, b) in g2.values().iter().zip(g.values()) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}

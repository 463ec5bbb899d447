use super::{PeriodicLattice, PotentialField, SpectralError};
use crate::scalar::Real;

/// Lifts a potential on `[-1, 1]^d` to the torus via `Etilde(phi) = E(cos phi)`.
///
/// Cosines are evaluated at the folded index `min(j, N - j)`, so the lattice
/// values are exactly even on every axis.
pub fn periodize_arccos<T, F>(lattice: &PeriodicLattice<T>, energy: F) -> Result<PotentialField<T>, SpectralError>
where
    T: Real,
    F: Fn(&[T]) -> T,
{
    let tau = T::TAU();
    if (lattice.period() - tau).abs() > T::epsilon() * tau * T::lit(4.0) {
        return Err(SpectralError::InvalidLattice(format!(
            "arccos lift needs period 2*pi, got {}",
            lattice.period()
        )));
    }
    let n = lattice.points();
    let cosines: Vec<T> = (0..n).map(|j| (lattice.coordinate(j.min(n - j))).cos()).collect();
    let mut x = vec![T::zero(); lattice.dim()];
    let values = (0..lattice.len())
        .map(|flat| {
            for (xi, j) in x.iter_mut().zip(lattice.indices(flat)) {
                *xi = cosines[j];
            }
            energy(&x)
        })
        .collect();
    PotentialField::new(lattice.clone(), values)
}

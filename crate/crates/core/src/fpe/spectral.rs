use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{PeriodicLattice, SpectralError};
use crate::scalar::Real;

/// FFT plans and wavenumbers for one lattice. Holds no mutable state, so a
/// single instance can serve concurrent readers.
pub struct SpectralOps<T: Real> {
    lattice: PeriodicLattice<T>,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    wavenumbers: Vec<T>,
}

impl<T: Real> SpectralOps<T> {
    pub fn new(lattice: &PeriodicLattice<T>) -> Self {
        let n = lattice.points();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let base = T::TAU() / lattice.period();
        let wavenumbers = (0..n)
            .map(|k| {
                if k == n / 2 {
                    T::zero()
                } else if k < n / 2 {
                    base * T::from_usize_lossy(k)
                } else {
                    -base * T::from_usize_lossy(n - k)
                }
            })
            .collect();
        Self {
            lattice: lattice.clone(),
            forward,
            inverse,
            wavenumbers,
        }
    }

    pub fn lattice(&self) -> &PeriodicLattice<T> {
        &self.lattice
    }

    /// Spectral derivative of `values` along `axis`.
    pub fn derivative(&self, values: &[T], axis: usize) -> Result<Vec<T>, SpectralError> {
        let mut out = vec![T::zero(); values.len()];
        self.derivative_into(values, axis, &mut out)?;
        Ok(out)
    }

    pub fn derivative_into(&self, values: &[T], axis: usize, out: &mut [T]) -> Result<(), SpectralError> {
        let lat = &self.lattice;
        if axis >= lat.dim() {
            return Err(SpectralError::InvalidLattice(format!(
                "axis {axis} out of range for a {}-dimensional lattice",
                lat.dim()
            )));
        }
        if !lat.is_periodic(axis) {
            return Err(SpectralError::NonPeriodic { axis });
        }
        if values.len() != lat.len() || out.len() != lat.len() {
            return Err(SpectralError::FieldLength {
                expected: lat.len(),
                actual: values.len().min(out.len()),
            });
        }
        let n = lat.points();
        // Axis 0 is the slow index; lines along it are strided by n.
        let (stride, lines) = if lat.dim() == 1 || axis == 1 {
            (1, lat.len() / n)
        } else {
            (n, n)
        };
        let line_start = |l: usize| if stride == 1 { l * n } else { l };
        let scale = T::one() / T::from_usize_lossy(n);
        let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
        let mut scratch = vec![Complex::new(T::zero(), T::zero()); self.forward.get_inplace_scratch_len()];
        let mut residue = T::zero();
        let mut magnitude = T::zero();
        for l in 0..lines {
            let start = line_start(l);
            for (j, b) in buf.iter_mut().enumerate() {
                *b = Complex::new(values[start + j * stride], T::zero());
            }
            self.forward.process_with_scratch(&mut buf, &mut scratch);
            for (b, k) in buf.iter_mut().zip(&self.wavenumbers) {
                *b = Complex::new(-b.im * *k, b.re * *k) * scale;
            }
            self.inverse.process_with_scratch(&mut buf, &mut scratch);
            for (j, b) in buf.iter().enumerate() {
                out[start + j * stride] = b.re;
                residue = residue.max(b.im.abs());
                magnitude = magnitude.max(b.re.abs());
            }
        }
        let tol = T::lit(1e-10).max(T::epsilon() * T::lit(1e4)) * (T::one() + magnitude);
        if residue > tol {
            return Err(SpectralError::ImaginaryResidue {
                residue: residue.to_f64_lossy(),
            });
        }
        Ok(())
    }
}

/// One-shot spectral derivative; plan [`SpectralOps`] once for repeated use.
pub fn fourier_derivative<T: Real>(
    lattice: &PeriodicLattice<T>,
    values: &[T],
    axis: usize,
) -> Result<Vec<T>, SpectralError> {
    SpectralOps::new(lattice).derivative(values, axis)
}

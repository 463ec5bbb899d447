use super::{DensityField, PotentialField, SpectralError, SpectralOps};
use crate::scalar::Real;

/// Safety factor in [`stable_time_step`]. The generator is similar to a
/// negative semidefinite matrix, so its spectrum is real and the relevant RK4
/// limit is the one on the negative real axis (about 2.78).
pub const STABILITY_CONSTANT: f64 = 2.5;

/// Power iterations used to estimate the generator's spectral radius.
const POWER_ITERATIONS: usize = 60;

/// Margin applied to the power-iteration estimate, which approaches the
/// spectral radius from below.
const RADIUS_MARGIN: f64 = 1.25;

/// Tolerance below which a slightly negative density is attributed to rounding.
const NEGATIVE_TOLERANCE: f64 = 1e-8;

/// Discretized Fokker-Planck generator `u -> div(exp(-Ebar) grad(exp(Ebar) u))`
/// with cached FFT plans and exponential factors.
pub struct Generator<T: Real> {
    ops: SpectralOps<T>,
    up: Vec<T>,
    down: Vec<T>,
}

impl<T: Real> Generator<T> {
    pub fn new(potential: &PotentialField<T>) -> Result<Self, SpectralError> {
        let values = potential.values();
        let (min, max) = values.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), v| {
            (lo.min(*v), hi.max(*v))
        });
        // A constant shift cancels between the two exponentials; centring the
        // range halves the largest exponent.
        let mid = (max + min) / T::lit(2.0);
        let up: Vec<T> = values.iter().map(|e| (*e - mid).exp()).collect();
        let down: Vec<T> = values.iter().map(|e| (mid - *e).exp()).collect();
        let spread = (max - min).to_f64_lossy();
        if up.iter().chain(&down).any(|v| !v.is_finite() || *v == T::zero()) {
            return Err(SpectralError::Overflow { spread });
        }
        Ok(Self {
            ops: SpectralOps::new(potential.lattice()),
            up,
            down,
        })
    }

    pub fn ops(&self) -> &SpectralOps<T> {
        &self.ops
    }

    pub fn apply(&self, u: &[T]) -> Result<Vec<T>, SpectralError> {
        let mut out = vec![T::zero(); u.len()];
        let mut w = vec![T::zero(); u.len()];
        let mut flux = vec![T::zero(); u.len()];
        let mut div = vec![T::zero(); u.len()];
        self.apply_into(u, &mut out, &mut w, &mut flux, &mut div)?;
        Ok(out)
    }

    fn apply_into(
        &self,
        u: &[T],
        out: &mut [T],
        w: &mut [T],
        flux: &mut [T],
        div: &mut [T],
    ) -> Result<(), SpectralError> {
        self.ops.lattice().check_field(u)?;
        for ((wi, ui), e) in w.iter_mut().zip(u).zip(&self.up) {
            *wi = *ui * *e;
        }
        out.iter_mut().for_each(|o| *o = T::zero());
        for axis in 0..self.ops.lattice().dim() {
            self.ops.derivative_into(w, axis, flux)?;
            for (f, e) in flux.iter_mut().zip(&self.down) {
                *f *= *e;
            }
            self.ops.derivative_into(flux, axis, div)?;
            for (o, d) in out.iter_mut().zip(div.iter()) {
                *o += *d;
            }
        }
        Ok(())
    }
}

/// Applies the generator once. Plan a [`Generator`] for repeated use.
pub fn apply_generator<T: Real>(potential: &PotentialField<T>, u: &[T]) -> Result<Vec<T>, SpectralError> {
    Generator::new(potential)?.apply(u)
}

/// Largest RK4 step accepted by [`evolve`]: `c / rho` where `rho` is the
/// larger of the continuum estimate
/// `sum_axes (k^2 + k max|d_a Ebar|) + max|lap Ebar|` (`k = pi N / period`)
/// and a power-iteration estimate of the discrete generator's spectral
/// radius. The second term matters for rough potentials, where products with
/// `exp(+-Ebar)` alias energy into the highest modes.
pub fn stable_time_step<T: Real>(potential: &PotentialField<T>) -> Result<T, SpectralError> {
    let lat = potential.lattice();
    let generator = Generator::new(potential)?;
    let ops = generator.ops();
    let k = lat.max_wavenumber();
    let mut denom = T::zero();
    let mut lap = vec![T::zero(); lat.len()];
    for axis in 0..lat.dim() {
        let d = ops.derivative(potential.values(), axis)?;
        let dd = ops.derivative(&d, axis)?;
        let g = d.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        denom += k * k + k * g;
        lap.iter_mut().zip(&dd).for_each(|(l, v)| *l += *v);
    }
    denom += lap.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    Ok(T::lit(STABILITY_CONSTANT) / denom.max(T::lit(RADIUS_MARGIN) * spectral_radius(&generator)?))
}

fn spectral_radius<T: Real>(generator: &Generator<T>) -> Result<T, SpectralError> {
    let n = generator.ops().lattice().len();
    // Deterministic start with energy in every mode.
    let mut v: Vec<T> = (0..n)
        .map(|i| T::lit(((i as f64 + 1.0) * 0.618_033_988_75).fract() - 0.5))
        .collect();
    let mut radius = T::zero();
    for _ in 0..POWER_ITERATIONS {
        let w = generator.apply(&v)?;
        let norm_v = v.iter().map(|x| *x * *x).sum::<T>().sqrt();
        let norm_w = w.iter().map(|x| *x * *x).sum::<T>().sqrt();
        if norm_w == T::zero() || norm_v == T::zero() {
            break;
        }
        radius = norm_w / norm_v;
        v = w.into_iter().map(|x| x / norm_w).collect();
    }
    Ok(radius)
}

#[derive(Debug, Clone)]
pub struct EvolveOutcome<T> {
    pub density: DensityField<T>,
    pub steps: usize,
    /// Step actually used: `total_time / steps`, never above the requested `dt`.
    pub dt: T,
    /// Largest per-step `|mass - 1|` removed by renormalization.
    pub max_mass_drift: T,
}

/// Integrates `d rho / dt = L rho` with classical RK4 up to `total_time`.
pub fn evolve<T: Real>(
    rho0: &DensityField<T>,
    potential: &PotentialField<T>,
    total_time: T,
    dt: T,
) -> Result<EvolveOutcome<T>, SpectralError> {
    let lat = potential.lattice();
    if rho0.lattice() != lat {
        return Err(SpectralError::LatticeMismatch);
    }
    if !(dt > T::zero()) || !(total_time >= T::zero()) || !dt.is_finite() || !total_time.is_finite() {
        return Err(SpectralError::InvalidLattice(format!(
            "need dt > 0 and total_time >= 0, got dt={dt}, total_time={total_time}"
        )));
    }
    let bound = stable_time_step(potential)?;
    if dt > bound {
        return Err(SpectralError::UnstableStep {
            dt: dt.to_f64_lossy(),
            bound: bound.to_f64_lossy(),
        });
    }
    let generator = Generator::new(potential)?;
    let steps = (total_time / dt).ceil().to_usize().unwrap_or(0);
    let h = if steps == 0 {
        T::zero()
    } else {
        total_time / T::from_usize_lossy(steps)
    };
    let n = lat.len();
    let mut rho = rho0.values().to_vec();
    let zero = || vec![T::zero(); n];
    let (mut k1, mut k2, mut k3, mut k4, mut stage) = (zero(), zero(), zero(), zero(), zero());
    let (mut w, mut flux, mut div) = (zero(), zero(), zero());
    let half = T::lit(0.5);
    let sixth = h / T::lit(6.0);
    let mut max_mass_drift = T::zero();
    for step in 1..=steps {
        generator.apply_into(&rho, &mut k1, &mut w, &mut flux, &mut div)?;
        for i in 0..n {
            stage[i] = rho[i] + half * h * k1[i];
        }
        generator.apply_into(&stage, &mut k2, &mut w, &mut flux, &mut div)?;
        for i in 0..n {
            stage[i] = rho[i] + half * h * k2[i];
        }
        generator.apply_into(&stage, &mut k3, &mut w, &mut flux, &mut div)?;
        for i in 0..n {
            stage[i] = rho[i] + h * k3[i];
        }
        generator.apply_into(&stage, &mut k4, &mut w, &mut flux, &mut div)?;
        for i in 0..n {
            rho[i] += sixth * (k1[i] + T::lit(2.0) * (k2[i] + k3[i]) + k4[i]);
        }
        let min = rho.iter().copied().fold(T::infinity(), T::min);
        if min < -T::lit(NEGATIVE_TOLERANCE) {
            return Err(SpectralError::NegativeDensity {
                step,
                value: min.to_f64_lossy(),
            });
        }
        let mass = lat.integrate(&rho);
        max_mass_drift = max_mass_drift.max((mass - T::one()).abs());
        rho.iter_mut().for_each(|r| *r /= mass);
    }
    Ok(EvolveOutcome {
        density: DensityField::from_raw(lat.clone(), rho),
        steps,
        dt: h,
        max_mass_drift,
    })
}

use rand::Rng;
use rand_distr::StandardNormal;

use super::{Energy, GibbsError};
use crate::scalar::{all_finite, Real};

/// Discretized Langevin dynamics `x <- x - alpha * grad E(x) + N(0, sigma^2)`.
///
/// `step_size` is the composite step `alpha * dt`. The stationary density of
/// the continuous-time limit is the Gibbs density at `beta = 2 alpha / sigma^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SgldConfig<T> {
    pub n_steps: usize,
    pub step_size: T,
    pub noise_scale: T,
    /// Project into the energy's domain box after every step.
    pub clamp: bool,
}

impl<T: Real> SgldConfig<T> {
    pub fn new(n_steps: usize, step_size: T, noise_scale: T) -> Self {
        Self {
            n_steps,
            step_size,
            noise_scale,
            clamp: true,
        }
    }

    pub fn unclamped(mut self) -> Self {
        self.clamp = false;
        self
    }

    pub fn with_steps(mut self, n_steps: usize) -> Self {
        self.n_steps = n_steps;
        self
    }

    /// `2 alpha / sigma^2`, or `None` for noiseless (gradient-descent) chains.
    pub fn implied_beta(&self) -> Option<T> {
        (self.noise_scale > T::zero()).then(|| T::lit(2.0) * self.step_size / (self.noise_scale * self.noise_scale))
    }

    pub fn validate(&self) -> Result<(), GibbsError> {
        if !(self.step_size > T::zero()) || !self.step_size.is_finite() {
            return Err(GibbsError::Config(format!(
                "SGLD step size must be positive, got {}",
                self.step_size
            )));
        }
        if !(self.noise_scale >= T::zero()) || !self.noise_scale.is_finite() {
            return Err(GibbsError::Config(format!(
                "SGLD noise scale must be non-negative, got {}",
                self.noise_scale
            )));
        }
        Ok(())
    }
}

/// Runs one chain from `x0` and returns its final state.
pub fn sgld_chain<T, E, R>(energy: &E, x0: &[T], cfg: &SgldConfig<T>, rng: &mut R) -> Result<Vec<T>, GibbsError>
where
    T: Real,
    E: Energy<T> + ?Sized,
    R: Rng + ?Sized,
{
    sgld_trajectory(energy, x0, cfg, rng, |_, _| {})
}

/// Like [`sgld_chain`], calling `visit(step, state)` after every step
/// (`step` counts from 1).
pub fn sgld_trajectory<T, E, R, V>(
    energy: &E,
    x0: &[T],
    cfg: &SgldConfig<T>,
    rng: &mut R,
    mut visit: V,
) -> Result<Vec<T>, GibbsError>
where
    T: Real,
    E: Energy<T> + ?Sized,
    R: Rng + ?Sized,
    V: FnMut(usize, &[T]),
{
    cfg.validate()?;
    if x0.len() != energy.dim() {
        return Err(GibbsError::Dimension {
            expected: energy.dim(),
            actual: x0.len(),
        });
    }
    let domain = if cfg.clamp {
        let d = energy
            .domain()
            .ok_or_else(|| GibbsError::Config("clamped SGLD needs a potential with a domain".into()))?;
        if let Some(index) = d.violation(x0) {
            return Err(GibbsError::OutOfDomain { index });
        }
        Some(d)
    } else {
        None
    };
    let mut x = x0.to_vec();
    let mut grad = vec![T::zero(); x.len()];
    let noisy = cfg.noise_scale > T::zero();
    for step in 0..cfg.n_steps {
        energy.energy_grad(&x, &mut grad).map_err(|e| match e {
            GibbsError::Graph(_) => GibbsError::NonFiniteGradient { step },
            other => other,
        })?;
        if !all_finite(&grad) {
            return Err(GibbsError::NonFiniteGradient { step });
        }
        for (xi, gi) in x.iter_mut().zip(&grad) {
            *xi -= cfg.step_size * *gi;
            if noisy {
                let z: f64 = rng.sample(StandardNormal);
                *xi += cfg.noise_scale * T::lit(z);
            }
        }
        if let Some(d) = domain {
            d.clamp(&mut x);
        }
        visit(step + 1, &x);
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::super::{DomainBox, Quadratic};
    use super::*;
    use crate::rng::stream;

    #[test]
    fn noiseless_step_is_gradient_descent() {
        let e = Quadratic::new(vec![0.0], 1.0);
        let cfg = SgldConfig::new(1, 0.1, 0.0).unclamped();
        let x = sgld_chain(&e, &[1.0], &cfg, &mut stream(0, "t", &[])).unwrap();
        assert_eq!(x, vec![0.9]);
    }

    #[test]
    fn noiseless_chain_matches_manual_descent_every_step() {
        let e = Quadratic::new(vec![0.25, -0.5], 3.0);
        let cfg = SgldConfig::new(25, 0.05, 0.0).unclamped();
        let mut manual = vec![1.0, 2.0];
        let mut steps = Vec::new();
        sgld_trajectory(&e, &manual.clone(), &cfg, &mut stream(0, "t", &[]), |_, s| {
            steps.push(s.to_vec())
        })
        .unwrap();
        for s in steps {
            for (m, c) in manual.iter_mut().zip(&e.center) {
                let g = 3.0 * (*m - c);
                *m -= 0.05 * g;
            }
            assert_eq!(s, manual);
        }
    }

    #[test]
    fn implied_beta_from_table_values() {
        let cfg = SgldConfig::<f64>::new(1, 0.01, 0.01);
        assert!((cfg.implied_beta().unwrap() - 200.0).abs() < 1e-9);
        assert_eq!(SgldConfig::new(1, 0.01, 0.0).implied_beta(), None);
    }

    #[test]
    fn clamped_iterates_stay_in_box() {
        let mut e = Quadratic::new(vec![2.0, -1.0], 50.0);
        e.domain = Some(DomainBox::unit(2));
        let cfg = SgldConfig::new(200, 0.01, 0.3);
        let mut seen = 0;
        sgld_trajectory(&e, &[0.5, 0.5], &cfg, &mut stream(1, "t", &[]), |_, s| {
            assert!(e.domain.as_ref().unwrap().contains(s));
            seen += 1;
        })
        .unwrap();
        assert_eq!(seen, 200);
    }

    #[test]
    fn deterministic_given_stream() {
        let e = Quadratic::new(vec![0.0], 1.0);
        let cfg = SgldConfig::new(50, 0.01, 0.1).unclamped();
        let a = sgld_chain(&e, &[0.3], &cfg, &mut stream(5, "t", &[1])).unwrap();
        let b = sgld_chain(&e, &[0.3], &cfg, &mut stream(5, "t", &[1])).unwrap();
        let c = sgld_chain(&e, &[0.3], &cfg, &mut stream(5, "t", &[2])).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn non_finite_gradient_reports_step() {
        use super::super::FnEnergy;
        // gradient blows up once x exceeds 1
        let e = FnEnergy::new(1, |x: &[f64], g: &mut [f64]| {
            g[0] = if x[0] > 1.0 { f64::NAN } else { -1.0 };
            -x[0]
        });
        let cfg = SgldConfig::new(10, 0.4, 0.0).unclamped();
        let err = sgld_chain(&e, &[0.0], &cfg, &mut stream(0, "t", &[])).unwrap_err();
        assert_eq!(err, GibbsError::NonFiniteGradient { step: 3 });
    }

    #[test]
    fn clamp_requires_start_in_domain() {
        let mut e = Quadratic::new(vec![0.0], 1.0);
        e.domain = Some(DomainBox::unit(1));
        let cfg = SgldConfig::new(1, 0.1, 0.0);
        assert_eq!(
            sgld_chain(&e, &[1.5], &cfg, &mut stream(0, "t", &[])).unwrap_err(),
            GibbsError::OutOfDomain { index: 0 }
        );
    }
}

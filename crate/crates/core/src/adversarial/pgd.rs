use rand::Rng;

use super::AdversarialError;
use crate::classifier::{loss_input_gradient, ClassifierModel};
use crate::scalar::{all_finite, Real};

pub const DEFAULT_PGD_STEPS: usize = 40;

/// L-infinity projected gradient ascent settings. `step_size` is the attack
/// step, unrelated to the Langevin step size.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackConfig<T> {
    pub epsilon: T,
    pub step_size: T,
    pub steps: usize,
    pub random_start: bool,
}

impl<T: Real> AttackConfig<T> {
    /// 40 steps of size `2.5 eps / 40` from a random start.
    pub fn new(epsilon: T) -> Self {
        Self::with_steps(epsilon, DEFAULT_PGD_STEPS)
    }

    /// `steps` steps of size `2.5 eps / steps` from a random start.
    pub fn with_steps(epsilon: T, steps: usize) -> Self {
        Self {
            epsilon,
            step_size: T::lit(2.5) * epsilon / T::from_usize_lossy(steps.max(1)),
            steps,
            random_start: true,
        }
    }

    pub fn validate(&self) -> Result<(), AdversarialError> {
        if !(self.epsilon >= T::zero() && self.epsilon <= T::one()) {
            return Err(AdversarialError::Config(format!(
                "epsilon {} outside [0, 1]",
                self.epsilon
            )));
        }
        if self.epsilon > T::zero() {
            if !(self.step_size > T::zero()) {
                return Err(AdversarialError::Config("attack step size must be positive".into()));
            }
            if self.step_size > T::lit(2.0) * self.epsilon {
                return Err(AdversarialError::Config(format!(
                    "attack step size {} exceeds 2 * epsilon",
                    self.step_size
                )));
            }
        }
        Ok(())
    }
}

/// `{x : |x - x+|_inf <= eps} ∩ [0, 1]^d`, stored as per-coordinate bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ThreatSet<T> {
    lo: Vec<T>,
    hi: Vec<T>,
}

impl<T: Real> ThreatSet<T> {
    pub fn new(center: &[T], epsilon: T) -> Self {
        let lo = center.iter().map(|c| (*c - epsilon).max(T::zero())).collect();
        let hi = center.iter().map(|c| (*c + epsilon).min(T::one())).collect();
        Self { lo, hi }
    }

    pub fn lo(&self) -> &[T] {
        &self.lo
    }

    pub fn hi(&self) -> &[T] {
        &self.hi
    }

    pub fn project(&self, x: &mut [T]) {
        for ((v, lo), hi) in x.iter_mut().zip(&self.lo).zip(&self.hi) {
            *v = v.max(*lo).min(*hi);
        }
    }

    /// First coordinate outside the set.
    pub fn violation(&self, x: &[T]) -> Option<usize> {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .position(|(v, (lo, hi))| !(*v >= *lo && *v <= *hi))
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(lo, hi)| {
                let u = T::lit(rng.random::<f64>());
                (*lo + u * (*hi - *lo)).min(*hi)
            })
            .collect()
    }
}

pub(crate) type PgdStart<T> = (ThreatSet<T>, Vec<T>);

/// Validated threat set and starting point: uniform in the set with a random
/// start, the clean point otherwise. `None` when `epsilon` is zero, in which
/// case the clean point is the only feasible output.
pub(crate) fn pgd_start<T, R>(
    x_plus: &[T],
    cfg: &AttackConfig<T>,
    rng: &mut R,
) -> Result<Option<PgdStart<T>>, AdversarialError>
where
    T: Real,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    if let Some(index) = x_plus.iter().position(|v| !(*v >= T::zero() && *v <= T::one())) {
        return Err(AdversarialError::Infeasible { iterate: 0, index });
    }
    if cfg.epsilon == T::zero() {
        return Ok(None);
    }
    let set = ThreatSet::new(x_plus, cfg.epsilon);
    let x0 = if cfg.random_start {
        set.sample_uniform(rng)
    } else {
        x_plus.to_vec()
    };
    Ok(Some((set, x0)))
}

/// Shared PGD loop: `steps` signed steps along `gradient` from `x0`, with
/// projection and a membership audit after every iterate. `visit` sees each
/// projected iterate.
pub(crate) fn pgd_loop<T, G, V>(
    set: &ThreatSet<T>,
    x0: Vec<T>,
    cfg: &AttackConfig<T>,
    mut gradient: G,
    mut visit: V,
) -> Result<Vec<T>, AdversarialError>
where
    T: Real,
    G: FnMut(usize, &[T]) -> Result<Vec<T>, AdversarialError>,
    V: FnMut(usize, &[T]),
{
    let mut x = x0;
    for iterate in 0..cfg.steps {
        let g = gradient(iterate, &x)?;
        if !all_finite(&g) {
            return Err(AdversarialError::NonFiniteGradient { iterate });
        }
        for (v, gi) in x.iter_mut().zip(&g) {
            if *gi > T::zero() {
                *v += cfg.step_size;
            } else if *gi < T::zero() {
                *v -= cfg.step_size;
            }
        }
        set.project(&mut x);
        if let Some(index) = set.violation(&x) {
            return Err(AdversarialError::Infeasible { iterate, index });
        }
        visit(iterate, &x);
    }
    Ok(x)
}

/// Maximizes the classifier's cross-entropy at label `y` over the threat set.
pub fn pgd_attack<T, R>(
    model: &ClassifierModel<T>,
    x_plus: &[T],
    y: usize,
    cfg: &AttackConfig<T>,
    rng: &mut R,
) -> Result<Vec<T>, AdversarialError>
where
    T: Real,
    R: Rng + ?Sized,
{
    pgd_trajectory(model, x_plus, y, cfg, rng, |_, _| {})
}

/// [`pgd_attack`] reporting every projected iterate.
pub fn pgd_trajectory<T, R, V>(
    model: &ClassifierModel<T>,
    x_plus: &[T],
    y: usize,
    cfg: &AttackConfig<T>,
    rng: &mut R,
    visit: V,
) -> Result<Vec<T>, AdversarialError>
where
    T: Real,
    R: Rng + ?Sized,
    V: FnMut(usize, &[T]),
{
    let Some((set, x0)) = pgd_start(x_plus, cfg, rng)? else {
        return Ok(x_plus.to_vec());
    };
    pgd_loop(
        &set,
        x0,
        cfg,
        |iterate, x| match loss_input_gradient(model, x, y) {
            Ok((_, g)) => Ok(g),
            Err(crate::classifier::ClassifierError::Graph(_)) => Err(AdversarialError::NonFiniteGradient { iterate }),
            Err(e) => Err(e.into()),
        },
        visit,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::cross_entropy;
    use crate::graph::{Layer, Network, NetworkSpec, ParamSet};
    use crate::rng::stream;
    use crate::tensor::Tensor;

    /// Logits `(w.x, 0)`.
    fn linear(w: Vec<f64>) -> ClassifierModel<f64> {
        let d = w.len();
        let spec = NetworkSpec::new(vec![d], vec![Layer::dense(d, 2)]);
        let mut weights = w.clone();
        weights.extend(std::iter::repeat_n(0.0, d));
        let params = ParamSet::new(
            vec!["layer0.weight".into(), "layer0.bias".into()],
            vec![Tensor::new(vec![2, d], weights).unwrap(), Tensor::zeros(&[2])],
        );
        ClassifierModel::new(Network::new(spec, params).unwrap(), 2).unwrap()
    }

    #[test]
    fn zero_epsilon_returns_input() {
        let m = linear(vec![1.0, -2.0]);
        let x = [0.3, 0.9];
        let out = pgd_attack(&m, &x, 0, &AttackConfig::new(0.0), &mut stream(1, "t", &[])).unwrap();
        assert_eq!(out, x.to_vec());
    }

    #[test]
    fn single_step_reaches_worst_corner() {
        let w = vec![0.7, -1.3, 0.2, -0.4];
        let m = linear(w.clone());
        let x = [0.5, 0.02, 0.99, 0.4];
        let eps = 0.05;
        let cfg = AttackConfig {
            epsilon: eps,
            step_size: 2.0 * eps,
            steps: 1,
            random_start: false,
        };
        // Label 0 is the logit w.x; the loss grows as w.x shrinks.
        let out = pgd_attack(&m, &x, 0, &cfg, &mut stream(1, "t", &[])).unwrap();
        let expected: Vec<f64> = x
            .iter()
            .zip(&w)
            .map(|(xi, wi)| (xi - eps * wi.signum()).clamp(0.0, 1.0))
            .collect();
        assert_eq!(out, expected);
        // Brute force over the corners of the clipped box.
        let set = ThreatSet::new(&x, eps);
        let mut best = f64::NEG_INFINITY;
        for mask in 0..16u32 {
            let c: Vec<f64> = (0..4)
                .map(|i| if mask >> i & 1 == 1 { set.hi()[i] } else { set.lo()[i] })
                .collect();
            best = best.max(cross_entropy(&m.logits(&c).unwrap(), 0).unwrap().0);
        }
        assert_eq!(cross_entropy(&m.logits(&out).unwrap(), 0).unwrap().0, best);
    }

    #[test]
    fn iterates_stay_in_threat_set() {
        let spec = NetworkSpec::mlp(6, &[8], 3, 0.2);
        let m = ClassifierModel::new(Network::<f64>::build(spec, 5).unwrap(), 3).unwrap();
        let x = [0.0, 1.0, 0.5, 0.01, 0.99, 0.3];
        let eps = 8.0 / 255.0;
        let set = ThreatSet::new(&x, eps);
        let mut seen = 0;
        pgd_trajectory(&m, &x, 1, &AttackConfig::new(eps), &mut stream(2, "t", &[]), |_, it| {
            assert!(set.violation(it).is_none());
            seen += 1;
        })
        .unwrap();
        assert_eq!(seen, DEFAULT_PGD_STEPS);
    }

    #[test]
    fn config_validation() {
        assert!(AttackConfig::new(1.5).validate().is_err());
        let mut c = AttackConfig::new(0.1);
        c.step_size = 0.3;
        assert!(c.validate().is_err());
        assert!(AttackConfig::<f64>::new(0.0).validate().is_ok());
    }
}

use rand::Rng;
use rayon::prelude::*;

use super::AdversarialError;
use crate::classifier::{ClassifierModel, Prediction};
use crate::gibbs::{sgld_chain, Energy, SgldConfig};
use crate::rng::{derive_seed, StreamRng};
use crate::scalar::Real;
use rand::SeedableRng;

/// Purification by `sgld.n_steps` Langevin steps, repeated over `trials`
/// independent chains whose logits are averaged.
#[derive(Debug, Clone, PartialEq)]
pub struct DefenseConfig<T> {
    pub sgld: SgldConfig<T>,
    pub trials: usize,
}

impl<T: Real> DefenseConfig<T> {
    /// 1,500 steps at step size and noise 0.01, 150 trials.
    pub fn paper() -> Self {
        Self {
            sgld: SgldConfig::new(1500, T::lit(0.01), T::lit(0.01)),
            trials: 150,
        }
    }

    pub fn validate(&self) -> Result<(), AdversarialError> {
        if self.trials == 0 {
            return Err(AdversarialError::Config("the defense needs at least one trial".into()));
        }
        self.sgld.validate()?;
        Ok(())
    }
}

/// One stochastic transformation `T(x)`: a Langevin chain started at `x`.
pub fn purify<T, E, R>(ebm: &E, x: &[T], sgld: &SgldConfig<T>, rng: &mut R) -> Result<Vec<T>, AdversarialError>
where
    T: Real,
    E: Energy<T> + ?Sized,
    R: Rng + ?Sized,
{
    Ok(sgld_chain(ebm, x, sgld, rng)?)
}

/// Component-wise mean of equally long logit vectors.
///
/// Each component is summed in sorted order as offsets from its smallest
/// value, so the result does not depend on trial order and a set of identical
/// vectors averages to that vector exactly.
pub fn average_logits<T: Real>(trials: &[Vec<T>]) -> Vec<T> {
    let Some(first) = trials.first() else {
        return Vec::new();
    };
    let m = T::from_usize_lossy(trials.len());
    let mut column = Vec::with_capacity(trials.len());
    (0..first.len())
        .map(|k| {
            column.clear();
            column.extend(trials.iter().map(|t| t[k]));
            column.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
            let base = column[0];
            base + column.iter().map(|v| *v - base).sum::<T>() / m
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EotOutcome<T> {
    /// Averaged logits `F_m(x)` and the post-transformation prediction.
    pub prediction: Prediction<T>,
    pub trials: usize,
}

pub(crate) fn trial_rng(base: u64, indices: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(base, "eot-trial", indices))
}

/// Runs `cfg.trials` purifications of `x` on independent streams and
/// classifies the averaged logits.
pub fn eot_defend<T, E, R>(
    ebm: &E,
    classifier: &ClassifierModel<T>,
    x: &[T],
    cfg: &DefenseConfig<T>,
    rng: &mut R,
) -> Result<EotOutcome<T>, AdversarialError>
where
    T: Real,
    E: Energy<T> + ?Sized,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    let base: u64 = rng.random();
    let logits = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let wrap = |e: AdversarialError| AdversarialError::Trial {
                trial: t,
                reason: e.to_string(),
            };
            let xt = purify(ebm, x, &cfg.sgld, &mut trial_rng(base, &[t as u64])).map_err(wrap)?;
            classifier.logits(&xt).map_err(|e| wrap(e.into()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EotOutcome {
        prediction: Prediction::from_logits(average_logits(&logits))?,
        trials: cfg.trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs::Quadratic;
    use crate::graph::{Network, NetworkSpec};
    use crate::rng::stream;

    fn clf() -> ClassifierModel<f64> {
        ClassifierModel::new(Network::build(NetworkSpec::mlp(3, &[6], 3, 0.2), 2).unwrap(), 3).unwrap()
    }

    fn bowl() -> Quadratic<f64> {
        let mut q = Quadratic::new(vec![0.5; 3], 4.0);
        q.domain = Some(crate::gibbs::DomainBox::unit(3));
        q
    }

    #[test]
    fn averaging_is_order_free_and_exact_on_duplicates() {
        let a = vec![vec![0.1, 2.0], vec![0.7, -1.0], vec![1e-3, 5.5]];
        let mut b = a.clone();
        b.rotate_left(1);
        assert_eq!(average_logits(&a), average_logits(&b));
        let same = vec![vec![0.1, 0.3, 1.0 / 3.0]; 7];
        assert_eq!(average_logits(&same), same[0]);
    }

    #[test]
    fn identity_transformation_reproduces_logits() {
        let c = clf();
        let x = [0.2, 0.4, 0.9];
        let cfg = DefenseConfig {
            sgld: SgldConfig::new(0, 0.01, 0.01),
            trials: 9,
        };
        let out = eot_defend(&bowl(), &c, &x, &cfg, &mut stream(1, "d", &[])).unwrap();
        assert_eq!(out.prediction.logits, c.logits(&x).unwrap());
    }

    #[test]
    fn single_trial_equals_that_trial() {
        let c = clf();
        let x = [0.2, 0.4, 0.9];
        let cfg = DefenseConfig {
            sgld: SgldConfig::new(20, 0.01, 0.05),
            trials: 1,
        };
        let mut r = stream(3, "d", &[]);
        let out = eot_defend(&bowl(), &c, &x, &cfg, &mut r.clone()).unwrap();
        let base: u64 = r.random();
        let xt = purify(&bowl(), &x, &cfg.sgld, &mut trial_rng(base, &[0])).unwrap();
        assert_eq!(out.prediction.logits, c.logits(&xt).unwrap());
    }

    #[test]
    fn distinct_seeds_give_distinct_purifications() {
        let cfg = SgldConfig::new(10, 0.01, 0.01);
        let x = [0.3, 0.3, 0.3];
        let a = purify(&bowl(), &x, &cfg, &mut stream(1, "p", &[])).unwrap();
        let b = purify(&bowl(), &x, &cfg, &mut stream(2, "p", &[])).unwrap();
        let diff = a.iter().zip(&b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        assert!(diff > 0.0);
        let same = purify(&bowl(), &x, &cfg.clone().with_steps(0), &mut stream(1, "p", &[])).unwrap();
        assert_eq!(same, x.to_vec());
    }

    #[test]
    fn zero_trials_rejected() {
        let cfg = DefenseConfig {
            sgld: SgldConfig::new(1, 0.01, 0.01),
            trials: 0,
        };
        assert!(eot_defend(&bowl(), &clf(), &[0.1; 3], &cfg, &mut stream(0, "d", &[])).is_err());
    }
}

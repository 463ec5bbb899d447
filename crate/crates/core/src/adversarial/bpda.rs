use rand::Rng;
use rayon::prelude::*;

use super::defense::{average_logits, purify, trial_rng};
use super::pgd::{pgd_loop, pgd_start};
use super::{AdversarialError, AttackConfig, DefenseConfig};
use crate::classifier::{softmax, ClassifierModel};
use crate::gibbs::Energy;
use crate::scalar::Real;

/// Where the classifier Jacobian is evaluated in the attack gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradientPoint {
    /// At each purified sample (the backward pass treats purification as
    /// the identity).
    #[default]
    Purified,
    /// At the current attack iterate, for ablation.
    Input,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpdaConfig<T> {
    pub attack: AttackConfig<T>,
    /// Purification settings; `trials` is the number of samples per iteration.
    pub defense: DefenseConfig<T>,
    pub gradient_point: GradientPoint,
}

/// Attack gradient at `x` from purified samples drawn on the streams given by
/// `trial_seeds`: the loss is the cross-entropy of the averaged logits, and
/// the gradient is `(1/m) sum_i J_f(xhat_i)^T dL/dF`.
pub fn bpda_gradient<T, E>(
    ebm: &E,
    classifier: &ClassifierModel<T>,
    x: &[T],
    y: usize,
    defense: &DefenseConfig<T>,
    trial_seeds: &[(u64, u64)],
    point: GradientPoint,
) -> Result<Vec<T>, AdversarialError>
where
    T: Real,
    E: Energy<T> + ?Sized,
{
    if trial_seeds.is_empty() {
        return Err(AdversarialError::Config("the attack needs at least one sample".into()));
    }
    let samples = trial_seeds
        .par_iter()
        .enumerate()
        .map(|(t, (base, index))| {
            purify(ebm, x, &defense.sgld, &mut trial_rng(*base, &[*index])).map_err(|e| AdversarialError::Trial {
                trial: t,
                reason: e.to_string(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let logits = samples
        .par_iter()
        .map(|s| classifier.logits(s))
        .collect::<Result<Vec<_>, _>>()?;
    let mut cotangent = softmax(&average_logits(&logits))?;
    if y >= cotangent.len() {
        return Err(AdversarialError::Config(format!("label {y} out of range")));
    }
    cotangent[y] -= T::one();
    let net = classifier.network();
    let grads = match point {
        GradientPoint::Purified => samples
            .par_iter()
            .map(|s| net.input_gradient(s, Some(&cotangent)).map(|(_, g)| g))
            .collect::<Result<Vec<_>, _>>()
            .map_err(crate::classifier::ClassifierError::from)?,
        GradientPoint::Input => vec![
            net.input_gradient(x, Some(&cotangent))
                .map_err(crate::classifier::ClassifierError::from)?
                .1,
        ],
    };
    Ok(average_logits(&grads))
}

/// Projected gradient attack against the averaged-logit defense. Every
/// iteration draws `defense.trials` fresh purified samples of the current
/// iterate. The random start consumes `rng` exactly as [`super::pgd_attack`]
/// does; one further draw seeds all purification streams.
pub fn bpda_eot_attack<T, E, R>(
    ebm: &E,
    classifier: &ClassifierModel<T>,
    x_plus: &[T],
    y: usize,
    cfg: &BpdaConfig<T>,
    rng: &mut R,
) -> Result<Vec<T>, AdversarialError>
where
    T: Real,
    E: Energy<T> + ?Sized,
    R: Rng + ?Sized,
{
    cfg.defense.validate()?;
    let Some((set, x0)) = pgd_start(x_plus, &cfg.attack, rng)? else {
        return Ok(x_plus.to_vec());
    };
    let base: u64 = rng.random();
    let m = cfg.defense.trials as u64;
    pgd_loop(
        &set,
        x0,
        &cfg.attack,
        |iterate, x| {
            let seeds: Vec<(u64, u64)> = (0..m).map(|t| (base, iterate as u64 * m + t)).collect();
            bpda_gradient(ebm, classifier, x, y, &cfg.defense, &seeds, cfg.gradient_point)
        },
        |_, _| {},
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversarial::pgd_attack;
    use crate::classifier::loss_input_gradient;
    use crate::gibbs::{DomainBox, Quadratic, SgldConfig};
    use crate::graph::{Network, NetworkSpec};
    use crate::rng::stream;

    fn clf() -> ClassifierModel<f64> {
        ClassifierModel::new(Network::build(NetworkSpec::mlp(4, &[8], 3, 0.2), 7).unwrap(), 3).unwrap()
    }

    fn bowl() -> Quadratic<f64> {
        let mut q = Quadratic::new(vec![0.5; 4], 2.0);
        q.domain = Some(DomainBox::unit(4));
        q
    }

    fn cfg(steps: usize, trials: usize) -> BpdaConfig<f64> {
        BpdaConfig {
            attack: AttackConfig::with_steps(8.0 / 255.0, 10),
            defense: DefenseConfig {
                sgld: SgldConfig::new(steps, 0.01, 0.01),
                trials,
            },
            gradient_point: GradientPoint::Purified,
        }
    }

    #[test]
    fn identity_purification_matches_plain_pgd() {
        let c = clf();
        let x = [0.1, 0.5, 0.8, 0.3];
        let a = bpda_eot_attack(&bowl(), &c, &x, 2, &cfg(0, 1), &mut stream(4, "a", &[])).unwrap();
        let b = pgd_attack(&c, &x, 2, &cfg(0, 1).attack, &mut stream(4, "a", &[])).unwrap();
        assert_eq!(a, b);
        let g = bpda_gradient(
            &bowl(),
            &c,
            &x,
            2,
            &cfg(0, 1).defense,
            &[(1, 0)],
            GradientPoint::Purified,
        )
        .unwrap();
        assert_eq!(g, loss_input_gradient(&c, &x, 2).unwrap().1);
    }

    #[test]
    fn duplicate_samples_equal_single_sample() {
        let c = clf();
        let x = [0.1, 0.5, 0.8, 0.3];
        let d = cfg(25, 1).defense;
        let one = bpda_gradient(&bowl(), &c, &x, 0, &d, &[(9, 3)], GradientPoint::Purified).unwrap();
        let two = bpda_gradient(&bowl(), &c, &x, 0, &d, &[(9, 3), (9, 3)], GradientPoint::Purified).unwrap();
        assert_eq!(one, two);
    }

    #[test]
    fn output_is_feasible() {
        let c = clf();
        let x = [0.0, 1.0, 0.5, 0.02];
        let out = bpda_eot_attack(&bowl(), &c, &x, 1, &cfg(5, 3), &mut stream(5, "a", &[])).unwrap();
        let set = crate::adversarial::ThreatSet::new(&x, 8.0 / 255.0);
        assert!(set.violation(&out).is_none());
    }
}

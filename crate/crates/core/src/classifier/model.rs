use super::ClassifierError;
use crate::checkpoint::Checkpoint;
use crate::graph::{Network, NetworkSpec, ParamSet};
use crate::scalar::{argmax, first_non_finite, Real};

/// Numerically stable softmax.
pub fn softmax<T: Real>(logits: &[T]) -> Result<Vec<T>, ClassifierError> {
    if let Some(index) = first_non_finite(logits) {
        return Err(ClassifierError::NonFiniteLogits { index });
    }
    if logits.is_empty() {
        return Err(ClassifierError::Empty);
    }
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|l| (*l - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Cross-entropy `-log softmax(logits)[label]` and its gradient with respect
/// to the logits, `softmax - onehot(label)`.
pub fn cross_entropy<T: Real>(logits: &[T], label: usize) -> Result<(T, Vec<T>), ClassifierError> {
    if label >= logits.len() {
        return Err(ClassifierError::Label {
            index: 0,
            label,
            classes: logits.len(),
        });
    }
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let log_total = logits.iter().map(|l| (*l - max).exp()).sum::<T>().ln() + max;
    let mut grad = softmax(logits)?;
    grad[label] -= T::one();
    Ok((log_total - logits[label], grad))
}

/// Logits, likelihoods and the derived label for one input.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<T> {
    pub logits: Vec<T>,
    pub probs: Vec<T>,
    pub label: usize,
    pub confidence: T,
}

impl<T: Real> Prediction<T> {
    pub fn from_logits(logits: Vec<T>) -> Result<Self, ClassifierError> {
        let probs = softmax(&logits)?;
        let label = argmax(&logits);
        let confidence = probs[label];
        Ok(Self {
            logits,
            probs,
            label,
            confidence,
        })
    }
}

/// Network whose output vector holds one logit per class.
#[derive(Debug, Clone)]
pub struct ClassifierModel<T> {
    network: Network<T>,
    classes: usize,
}

impl<T: Real> ClassifierModel<T> {
    pub fn new(network: Network<T>, classes: usize) -> Result<Self, ClassifierError> {
        if network.output_len() != classes || classes < 2 {
            return Err(ClassifierError::Config(format!(
                "network has {} outputs for {classes} classes",
                network.output_len()
            )));
        }
        Ok(Self { network, classes })
    }

    pub fn network(&self) -> &Network<T> {
        &self.network
    }

    pub fn params(&self) -> &ParamSet<T> {
        self.network.params()
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<T> {
        self.network.params_mut()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn input_len(&self) -> usize {
        self.network.input_len()
    }

    pub fn logits(&self, x: &[T]) -> Result<Vec<T>, ClassifierError> {
        let out = self.network.forward(x)?;
        if let Some(index) = first_non_finite(&out) {
            return Err(ClassifierError::NonFiniteLogits { index });
        }
        Ok(out)
    }

    pub fn predict(&self, x: &[T]) -> Result<Prediction<T>, ClassifierError> {
        Prediction::from_logits(self.logits(x)?)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new();
        ck.push_scalar("meta.classes", self.classes as f64);
        ck.push_params("classifier.", self.network.params());
        ck
    }

    pub fn from_checkpoint(spec: NetworkSpec, ck: &Checkpoint) -> Result<Self, ClassifierError> {
        let template = ParamSet::<T>::zeros_for(&spec);
        let params = ck.params("classifier.", &template)?;
        let classes = ck.scalar("meta.classes")? as usize;
        Self::new(Network::new(spec, params)?, classes)
    }
}

/// Cross-entropy loss at `x` and its gradient with respect to `x`.
pub fn loss_input_gradient<T: Real>(
    model: &ClassifierModel<T>,
    x: &[T],
    label: usize,
) -> Result<(T, Vec<T>), ClassifierError> {
    let logits = model.logits(x)?;
    let (loss, dlogits) = cross_entropy(&logits, label)?;
    let (_, grad) = model.network.input_gradient(x, Some(&dlogits))?;
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn softmax_closed_forms() {
        assert_eq!(softmax(&[0.0f64, 0.0]).unwrap(), vec![0.5, 0.5]);
        let p = softmax(&[3.0f64.ln(), 0.0]).unwrap();
        assert!((p[0] - 0.75).abs() < 1e-15 && (p[1] - 0.25).abs() < 1e-15);
        assert!(matches!(
            softmax(&[0.0, f64::NAN]),
            Err(ClassifierError::NonFiniteLogits { index: 1 })
        ));
    }

    #[test]
    fn cross_entropy_gradient_matches_finite_differences() {
        let logits = [0.3f64, -1.2, 2.0];
        let (_, g) = cross_entropy(&logits, 1).unwrap();
        for i in 0..3 {
            let mut a = logits;
            let mut b = logits;
            a[i] += 1e-6;
            b[i] -= 1e-6;
            let fd = (cross_entropy(&a, 1).unwrap().0 - cross_entropy(&b, 1).unwrap().0) / 2e-6;
            assert!((fd - g[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let spec = NetworkSpec::mlp(3, &[5], 3, 0.2);
        let model = ClassifierModel::new(Network::<f64>::build(spec, 3).unwrap(), 3).unwrap();
        let x = [0.2, 0.7, 0.4];
        let (_, g) = loss_input_gradient(&model, &x, 2).unwrap();
        for i in 0..3 {
            let mut a = x;
            let mut b = x;
            a[i] += 1e-6;
            b[i] -= 1e-6;
            let la = loss_input_gradient(&model, &a, 2).unwrap().0;
            let lb = loss_input_gradient(&model, &b, 2).unwrap().0;
            assert!(((la - lb) / 2e-6 - g[i]).abs() < 1e-7);
        }
    }

    proptest! {
        #[test]
        fn softmax_normalized_and_shift_invariant(
            logits in prop::collection::vec(-30.0f64..30.0, 2..12),
            shift in -50.0f64..50.0,
        ) {
            let p = softmax(&logits).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|v| *v > 0.0));
            prop_assert_eq!(argmax(&p), argmax(&logits));
            let shifted: Vec<f64> = logits.iter().map(|l| l + shift).collect();
            let q = softmax(&shifted).unwrap();
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}

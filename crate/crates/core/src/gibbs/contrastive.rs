use super::{EnergyModel, GibbsError};
use crate::graph::{GraphError, ParamSet};
use crate::scalar::Real;

/// Descent direction for the negative log-likelihood plus batch energies.
#[derive(Debug, Clone)]
pub struct ContrastiveGradient<T> {
    /// `beta * (mean_data grad E - mean_samples grad E)`.
    pub grads: ParamSet<T>,
    pub data_energy: T,
    pub sample_energy: T,
}

/// Monte Carlo estimate of `-grad_theta log p_theta` averaged over the data
/// batch, with model expectations replaced by the sample batch.
pub fn contrastive_gradient<T, D, S>(
    model: &EnergyModel<T>,
    data: &[D],
    samples: &[S],
) -> Result<ContrastiveGradient<T>, GibbsError>
where
    T: Real,
    D: AsRef<[T]>,
    S: AsRef<[T]>,
{
    if data.is_empty() {
        return Err(GibbsError::EmptyBatch { batch: "data" });
    }
    if samples.is_empty() {
        return Err(GibbsError::EmptyBatch { batch: "sample" });
    }
    let (data_grad, data_energy) = mean_param_gradient(model, data, "data")?;
    let (sample_grad, sample_energy) = mean_param_gradient(model, samples, "sample")?;
    // The two means are formed identically, so identical batches cancel exactly.
    let mut grads = data_grad;
    grads.axpy(-T::one(), &sample_grad);
    grads.scale(model.beta());
    Ok(ContrastiveGradient {
        grads,
        data_energy,
        sample_energy,
    })
}

fn mean_param_gradient<T: Real, X: AsRef<[T]>>(
    model: &EnergyModel<T>,
    batch: &[X],
    name: &'static str,
) -> Result<(ParamSet<T>, T), GibbsError> {
    let net = model.network();
    let mut grads = net.params().zeros_like();
    let scale = T::one() / T::from_usize_lossy(batch.len());
    let mut energy_sum = T::zero();
    for (index, x) in batch.iter().enumerate() {
        let x = x.as_ref();
        if x.len() != net.input_len() {
            return Err(GibbsError::Dimension {
                expected: net.input_len(),
                actual: x.len(),
            });
        }
        let out = net
            .accumulate_param_gradient(x, None, scale, &mut grads)
            .map_err(|e| match e {
                GraphError::NonFinite { .. }
                | GraphError::NonFiniteInput { .. }
                | GraphError::NonFiniteGradient { .. } => GibbsError::NonFiniteEnergy { batch: name, index },
                other => GibbsError::Graph(other),
            })?;
        energy_sum += out[0];
    }
    Ok((grads, energy_sum * scale))
}

#[cfg(test)]
mod tests {
    use super::super::DomainBox;
    use super::*;
    use crate::graph::{Network, NetworkSpec};
    use crate::tensor::Tensor;

    fn linear_model(w: &[f64], beta: f64) -> EnergyModel<f64> {
        let spec = NetworkSpec::mlp(w.len(), &[], 1, 0.2);
        let params = ParamSet::new(
            vec!["layer0.weight".into(), "layer0.bias".into()],
            vec![
                Tensor::new(vec![1, w.len()], w.to_vec()).unwrap(),
                Tensor::new(vec![1], vec![0.1]).unwrap(),
            ],
        );
        EnergyModel::new(Network::new(spec, params).unwrap(), beta, DomainBox::unit(w.len())).unwrap()
    }

    #[test]
    fn identical_batches_give_exact_zero() {
        let spec = NetworkSpec::mlp(2, &[8, 8], 1, 0.2);
        let model = EnergyModel::new(Network::<f64>::build(spec, 3).unwrap(), 200.0, DomainBox::unit(2)).unwrap();
        let batch = vec![vec![0.1, 0.9], vec![0.4, 0.3], vec![0.77, 0.01]];
        let cg = contrastive_gradient(&model, &batch, &batch).unwrap();
        assert!(cg.grads.iter_values().all(|v| *v == 0.0));
        assert_eq!(cg.data_energy, cg.sample_energy);
    }

    #[test]
    fn linear_energy_gradient_is_scaled_mean_difference() {
        let beta = 2.5;
        let model = linear_model(&[1.0, -2.0], beta);
        let data = vec![vec![0.2, 0.4], vec![0.6, 0.0]];
        let samples = vec![vec![0.9, 0.9], vec![0.1, 0.5], vec![0.5, 0.2]];
        let cg = contrastive_gradient(&model, &data, &samples).unwrap();
        let md = [0.4, 0.2];
        let ms = [0.5, 1.6 / 3.0];
        let gw = cg.grads.tensors()[0].values();
        for k in 0..2 {
            assert!((gw[k] - beta * (md[k] - ms[k])).abs() < 1e-12);
        }
        // bias gradient: beta * (1 - 1)
        assert!(cg.grads.tensors()[1].values()[0].abs() < 1e-12);
    }

    #[test]
    fn empty_batches_rejected() {
        let model = linear_model(&[1.0], 1.0);
        let empty: Vec<Vec<f64>> = vec![];
        assert!(contrastive_gradient(&model, &empty, &[vec![0.5]]).is_err());
        assert!(contrastive_gradient(&model, &[vec![0.5]], &empty).is_err());
    }

    #[test]
    fn non_finite_energy_names_element() {
        let model = linear_model(&[1.0], 1.0);
        let err = contrastive_gradient(&model, &[vec![0.5]], &[vec![0.5], vec![f64::NAN]]).unwrap_err();
        assert_eq!(
            err,
            GibbsError::NonFiniteEnergy {
                batch: "sample",
                index: 1
            }
        );
    }
}

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::{cross_entropy, ClassifierError, ClassifierModel, LabeledDataset, Split};
use crate::graph::{Layer, Network, NetworkSpec, OptimizerMode, OptimizerState, ParamSet};
use crate::rng;
use crate::scalar::Real;

/// Examples per gradient shard; shards are reduced in a fixed order so the
/// result does not depend on the worker count.
const SHARD: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierConfig<T> {
    pub network: NetworkSpec,
    pub epochs: usize,
    pub batch_size: usize,
    /// `(first epoch, learning rate)` pairs in increasing epoch order; the
    /// first entry must start at epoch 0.
    pub lr_schedule: Vec<(usize, T)>,
    pub l2_coeff: T,
    pub seed: u64,
}

impl<T: Real> ClassifierConfig<T> {
    /// Full-scale schedule: 100 epochs of batch 100, SGD at 1e-1, 1e-2 from
    /// epoch 40 and 1e-3 from epoch 60, L2 coefficient 2e-4. The network is
    /// a compact convolutional stand-in for a wide residual network.
    pub fn paper_cifar10(seed: u64) -> Self {
        Self {
            network: cifar_classifier_spec(),
            epochs: 100,
            batch_size: 100,
            lr_schedule: vec![(0, T::lit(1e-1)), (40, T::lit(1e-2)), (60, T::lit(1e-3))],
            l2_coeff: T::lit(2e-4),
            seed,
        }
    }

    pub fn learning_rate(&self, epoch: usize) -> T {
        self.lr_schedule
            .iter()
            .take_while(|(start, _)| *start <= epoch)
            .last()
            .map_or(T::zero(), |(_, lr)| *lr)
    }

    pub fn validate(&self) -> Result<(), ClassifierError> {
        if self.batch_size == 0 {
            return Err(ClassifierError::Config("batch size must be positive".into()));
        }
        if self.lr_schedule.first().map(|(e, _)| *e) != Some(0) {
            return Err(ClassifierError::Config(
                "learning-rate schedule must start at epoch 0".into(),
            ));
        }
        if self.lr_schedule.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(ClassifierError::Config(
                "learning-rate schedule epochs must increase".into(),
            ));
        }
        if self.lr_schedule.iter().any(|(_, lr)| !(*lr > T::zero())) {
            return Err(ClassifierError::Config("learning rates must be positive".into()));
        }
        Ok(())
    }
}

/// 3x32x32 -> 10 logits through three strided convolutions.
pub fn cifar_classifier_spec() -> NetworkSpec {
    let slope = crate::graph::DEFAULT_LEAKY_SLOPE;
    NetworkSpec::new(
        vec![3, 32, 32],
        vec![
            Layer::conv2d(16, 3, 3, 1, 1),
            Layer::LeakyRelu { negative_slope: slope },
            Layer::conv2d(32, 16, 4, 2, 1),
            Layer::LeakyRelu { negative_slope: slope },
            Layer::conv2d(64, 32, 4, 2, 1),
            Layer::LeakyRelu { negative_slope: slope },
            Layer::conv2d(10, 64, 8, 1, 0),
        ],
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierLogRow {
    pub epoch: usize,
    pub train_acc: f64,
    pub test_acc: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClassifierLog {
    pub rows: Vec<ClassifierLogRow>,
}

impl ClassifierLog {
    pub const HEADER: &'static str = "epoch,train_acc,test_acc,lr";

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::HEADER);
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{}\n", r.epoch, r.train_acc, r.test_acc, r.lr));
        }
        out
    }
}

/// Fraction of `split` examples whose predicted label is correct; 0 for an
/// empty split.
pub fn accuracy<T: Real>(
    model: &ClassifierModel<T>,
    data: &LabeledDataset<T>,
    split: Split,
) -> Result<f64, ClassifierError> {
    let idx = data.indices(split);
    if idx.is_empty() {
        return Ok(0.0);
    }
    let correct = idx
        .par_iter()
        .map(|&i| Ok(usize::from(model.predict(&data.inputs()[i])?.label == data.labels()[i])))
        .collect::<Result<Vec<usize>, ClassifierError>>()?
        .into_iter()
        .sum::<usize>();
    Ok(correct as f64 / idx.len() as f64)
}

/// Minibatch SGD on mean softmax cross-entropy with L2 weight decay.
/// Zero epochs return the initialization unchanged.
pub fn train_classifier<T: Real>(
    cfg: &ClassifierConfig<T>,
    data: &LabeledDataset<T>,
) -> Result<(ClassifierModel<T>, ClassifierLog), ClassifierError> {
    cfg.validate()?;
    if cfg.network.input_len() != data.dim() {
        return Err(ClassifierError::Config(format!(
            "network takes {} inputs, dataset has {}",
            cfg.network.input_len(),
            data.dim()
        )));
    }
    if let Some(class) = data.class_counts(Split::Train).iter().position(|c| *c == 0) {
        return Err(ClassifierError::MissingClass { class });
    }
    let network = Network::build(cfg.network.clone(), rng::derive_seed(cfg.seed, "clf-init", &[]))?;
    let mut model = ClassifierModel::new(network, data.classes())?;
    let mut log = ClassifierLog::default();
    let mut train_idx = data.indices(Split::Train);
    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate(epoch);
        let mut optimizer = OptimizerState::new(OptimizerMode::Sgd, lr)?;
        train_idx.sort_unstable();
        train_idx.shuffle(&mut rng::stream(cfg.seed, "clf-shuffle", &[epoch as u64]));
        for batch in train_idx.chunks(cfg.batch_size) {
            let grads = batch_gradient(&model, data, batch)?;
            optimizer.step(model.params_mut(), &grads, cfg.l2_coeff)?;
        }
        log.rows.push(ClassifierLogRow {
            epoch,
            train_acc: accuracy(&model, data, Split::Train)?,
            test_acc: accuracy(&model, data, Split::Test)?,
            lr: lr.to_f64_lossy(),
        });
    }
    Ok((model, log))
}

fn batch_gradient<T: Real>(
    model: &ClassifierModel<T>,
    data: &LabeledDataset<T>,
    batch: &[usize],
) -> Result<ParamSet<T>, ClassifierError> {
    let scale = T::one() / T::from_usize_lossy(batch.len());
    let shards = batch
        .par_chunks(SHARD)
        .map(|shard| {
            let mut g = model.params().zeros_like();
            for &i in shard {
                let x = &data.inputs()[i];
                let logits = model.logits(x)?;
                let (_, dlogits) = cross_entropy(&logits, data.labels()[i])?;
                model
                    .network()
                    .accumulate_param_gradient(x, Some(&dlogits), scale, &mut g)?;
            }
            Ok(g)
        })
        .collect::<Result<Vec<_>, ClassifierError>>()?;
    let mut total = model.params().zeros_like();
    for g in &shards {
        total.axpy(T::one(), g);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn blobs(seed: u64) -> LabeledDataset<f64> {
        let mut r = rng::stream(seed, "blobs", &[]);
        let mut inputs = Vec::new();
        let mut labels = Vec::new();
        for i in 0..200 {
            let c = i % 2;
            let cx = if c == 0 { 0.25 } else { 0.75 };
            inputs.push(vec![
                cx + 0.1 * (r.random::<f64>() - 0.5),
                0.2 + 0.6 * r.random::<f64>(),
            ]);
            labels.push(c);
        }
        LabeledDataset::new(vec![2], 2, inputs, labels, vec![Split::Train; 200])
            .unwrap()
            .with_class_split(0.25)
    }

    fn cfg(epochs: usize) -> ClassifierConfig<f64> {
        ClassifierConfig {
            network: NetworkSpec::mlp(2, &[16], 2, 0.2),
            epochs,
            batch_size: 20,
            lr_schedule: vec![(0, 0.5), (15, 0.1)],
            l2_coeff: 2e-4,
            seed: 9,
        }
    }

    #[test]
    fn separable_blobs_are_learned() {
        let data = blobs(1);
        let (model, log) = train_classifier(&cfg(30), &data).unwrap();
        assert!(accuracy(&model, &data, Split::Test).unwrap() >= 0.99);
        assert_eq!(log.rows.len(), 30);
        assert_eq!(log.rows[20].lr, 0.1);
    }

    #[test]
    fn zero_epochs_keep_initialization() {
        let c = cfg(0);
        let (model, log) = train_classifier(&c, &blobs(2)).unwrap();
        let init = Network::<f64>::build(c.network.clone(), rng::derive_seed(c.seed, "clf-init", &[])).unwrap();
        assert_eq!(model.params(), init.params());
        assert!(log.rows.is_empty());
    }

    #[test]
    fn training_is_reproducible() {
        let data = blobs(3);
        let (a, _) = train_classifier(&cfg(3), &data).unwrap();
        let (b, _) = train_classifier(&cfg(3), &data).unwrap();
        assert_eq!(a.params(), b.params());
    }

    #[test]
    fn missing_class_is_rejected() {
        let d = LabeledDataset::new(vec![1], 2, vec![vec![0.1]; 4], vec![0; 4], vec![Split::Train; 4]).unwrap();
        let c = ClassifierConfig {
            network: NetworkSpec::mlp(1, &[4], 2, 0.2),
            ..cfg(1)
        };
        assert_eq!(
            train_classifier(&c, &d).unwrap_err(),
            ClassifierError::MissingClass { class: 1 }
        );
    }

    #[test]
    fn paper_preset_schedule() {
        let c = ClassifierConfig::<f64>::paper_cifar10(0);
        assert_eq!((c.epochs, c.batch_size, c.l2_coeff), (100, 100, 2e-4));
        assert_eq!(c.learning_rate(39), 1e-1);
        assert_eq!(c.learning_rate(40), 1e-2);
        assert_eq!(c.learning_rate(60), 1e-3);
        assert_eq!(c.network.output_len().unwrap(), 10);
    }
}

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{contrastive_gradient, sgld_chain, DomainBox, EnergyModel, GibbsError, ReplayBuffer, SgldConfig};
use crate::graph::{Network, NetworkSpec, OptimizerMode, OptimizerState};
use crate::rng;
use crate::scalar::Real;

/// Optimizer and learning rate for one stretch of training.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerPhase<T> {
    pub mode: OptimizerMode,
    pub learning_rate: T,
}

/// Persistent contrastive divergence settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig<T> {
    pub network: NetworkSpec,
    pub domain: DomainBox<T>,
    pub total_batches: usize,
    pub batch_size: usize,
    pub first_phase: OptimizerPhase<T>,
    /// Batch index at which `second_phase` takes over.
    pub switch_batch: usize,
    pub second_phase: OptimizerPhase<T>,
    pub sgld: SgldConfig<T>,
    pub buffer_capacity: usize,
    pub reinit_prob: f64,
    /// Std of the Gaussian jitter added to data batches (0 disables).
    pub data_jitter: T,
    /// Abort when `|mean data energy - mean sample energy|` exceeds this.
    pub divergence_bound: T,
    pub l2_coeff: T,
    /// Model inverse temperature; defaults to the SGLD-implied `2 alpha / sigma^2`.
    pub beta: Option<T>,
    pub seed: u64,
}

impl<T: Real> TrainConfig<T> {
    /// Training schedule at full CIFAR-10 scale: 250,000 batches of 100,
    /// Adam at 1e-4 switching to SGD at 5e-5 after 125,000 batches, SGLD
    /// step 0.01 and noise 0.01, no weight decay.
    pub fn paper_cifar10(n_steps: usize, seed: u64) -> Self {
        Self {
            network: NetworkSpec::conv_energy_32(),
            domain: DomainBox::unit(3 * 32 * 32),
            total_batches: 250_000,
            batch_size: 100,
            first_phase: OptimizerPhase {
                mode: OptimizerMode::Adam,
                learning_rate: T::lit(1e-4),
            },
            switch_batch: 125_000,
            second_phase: OptimizerPhase {
                mode: OptimizerMode::Sgd,
                learning_rate: T::lit(5e-5),
            },
            sgld: SgldConfig::new(n_steps, T::lit(0.01), T::lit(0.01)),
            buffer_capacity: super::DEFAULT_BUFFER_CAPACITY,
            reinit_prob: 0.0,
            data_jitter: T::lit(0.005),
            divergence_bound: T::lit(1e3),
            l2_coeff: T::zero(),
            beta: None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), GibbsError> {
        self.sgld.validate()?;
        if self.switch_batch > self.total_batches {
            return Err(GibbsError::Config(format!(
                "switch batch {} after total batches {}",
                self.switch_batch, self.total_batches
            )));
        }
        if self.batch_size == 0 {
            return Err(GibbsError::Config("batch size must be positive".into()));
        }
        for phase in [&self.first_phase, &self.second_phase] {
            if !(phase.learning_rate >= T::zero()) {
                return Err(GibbsError::Config("learning rates must be non-negative".into()));
            }
        }
        if self.domain.dim() != self.network.input_len() {
            return Err(GibbsError::Dimension {
                expected: self.network.input_len(),
                actual: self.domain.dim(),
            });
        }
        Ok(())
    }

    pub fn model_beta(&self) -> T {
        self.beta.or_else(|| self.sgld.implied_beta()).unwrap_or_else(T::one)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLogRow {
    pub batch: usize,
    pub data_energy: f64,
    pub sample_energy: f64,
    pub grad_norm: f64,
    pub lr: f64,
    pub mode: OptimizerMode,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub rows: Vec<TrainLogRow>,
    pub data_jitter: f64,
}

impl TrainLog {
    pub const HEADER: &'static str = "batch,data_energy,sample_energy,grad_norm,lr,mode";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.batch,
                r.data_energy,
                r.sample_energy,
                r.grad_norm,
                r.lr,
                r.mode.as_str()
            ));
        }
        out
    }

    /// Mean of `|data_energy - sample_energy|` over `rows[range]`.
    pub fn mean_gap(&self, range: std::ops::Range<usize>) -> f64 {
        let rows = &self.rows[range];
        rows.iter()
            .map(|r| (r.data_energy - r.sample_energy).abs())
            .sum::<f64>()
            / rows.len().max(1) as f64
    }
}

/// Trains an energy model by persistent contrastive divergence.
///
/// Every batch draws a data minibatch, pulls chain states from the replay
/// buffer, evolves them with SGLD, steps the optimizer along the contrastive
/// gradient and writes the evolved states back. A zero learning rate leaves
/// the parameters untouched.
pub fn train_ebm<T, X>(cfg: &TrainConfig<T>, dataset: &[X]) -> Result<(EnergyModel<T>, TrainLog), GibbsError>
where
    T: Real,
    X: AsRef<[T]> + Sync,
{
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(GibbsError::EmptyBatch { batch: "data" });
    }
    for x in dataset {
        if let Some(index) = cfg.domain.violation(x.as_ref()) {
            return Err(GibbsError::OutOfDomain { index });
        }
    }
    let network = Network::build(cfg.network.clone(), rng::derive_seed(cfg.seed, "ebm-init", &[]))?;
    let mut model = EnergyModel::new(network, cfg.model_beta(), cfg.domain.clone())?;
    let mut buffer = ReplayBuffer::new(
        cfg.buffer_capacity,
        cfg.domain.clone(),
        cfg.reinit_prob,
        &mut rng::stream(cfg.seed, "buffer-init", &[]),
    )?;
    let mut log = TrainLog {
        rows: Vec::with_capacity(cfg.total_batches),
        data_jitter: cfg.data_jitter.to_f64_lossy(),
    };
    let mut optimizer: Option<OptimizerState<T>> = None;
    let mut active_phase = usize::MAX;

    for batch in 0..cfg.total_batches {
        let (phase_index, phase) = if batch < cfg.switch_batch {
            (0, &cfg.first_phase)
        } else {
            (1, &cfg.second_phase)
        };
        if phase_index != active_phase {
            active_phase = phase_index;
            optimizer = if phase.learning_rate > T::zero() {
                Some(OptimizerState::new(phase.mode, phase.learning_rate)?)
            } else {
                None
            };
        }

        let mut data_rng = rng::stream(cfg.seed, "ebm-data", &[batch as u64]);
        let data: Vec<Vec<T>> = (0..cfg.batch_size)
            .map(|_| {
                let mut x = dataset[data_rng.random_range(0..dataset.len())].as_ref().to_vec();
                if cfg.data_jitter > T::zero() {
                    for v in x.iter_mut() {
                        let z: f64 = data_rng.sample(StandardNormal);
                        *v += cfg.data_jitter * T::lit(z);
                    }
                    cfg.domain.clamp(&mut x);
                }
                x
            })
            .collect();

        let draw = buffer.draw(
            cfg.batch_size,
            &mut rng::stream(cfg.seed, "buffer-draw", &[batch as u64]),
        )?;
        let evolved = draw
            .states
            .par_iter()
            .enumerate()
            .map(|(chain, x0)| {
                let mut chain_rng = rng::stream(cfg.seed, "ebm-sgld", &[batch as u64, chain as u64]);
                sgld_chain(&model, x0, &cfg.sgld, &mut chain_rng)
            })
            .collect::<Result<Vec<_>, _>>()?;

        let cg = contrastive_gradient(&model, &data, &evolved)?;
        let gap = (cg.data_energy - cg.sample_energy).abs();
        if !(gap <= cfg.divergence_bound) {
            return Err(GibbsError::Diverged {
                batch,
                data_energy: cg.data_energy.to_f64_lossy(),
                sample_energy: cg.sample_energy.to_f64_lossy(),
                bound: cfg.divergence_bound.to_f64_lossy(),
            });
        }
        let grad_norm = cg.grads.squared_norm().sqrt();
        if let Some(opt) = optimizer.as_mut() {
            opt.step(model.params_mut(), &cg.grads, cfg.l2_coeff)?;
        }
        buffer.store(&draw, &evolved)?;
        log.rows.push(TrainLogRow {
            batch,
            data_energy: cg.data_energy.to_f64_lossy(),
            sample_energy: cg.sample_energy.to_f64_lossy(),
            grad_norm: grad_norm.to_f64_lossy(),
            lr: phase.learning_rate.to_f64_lossy(),
            mode: phase.mode,
        });
    }
    Ok((model, log))
}

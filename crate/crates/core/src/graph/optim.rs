use super::{GraphError, ParamSet};
use crate::scalar::Real;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerMode {
    Adam,
    Sgd,
}

impl OptimizerMode {
    pub fn as_str(self) -> &'static str {
        match self {
            OptimizerMode::Adam => "adam",
            OptimizerMode::Sgd => "sgd",
        }
    }
}

impl std::str::FromStr for OptimizerMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "adam" => Ok(OptimizerMode::Adam),
            "sgd" => Ok(OptimizerMode::Sgd),
            other => Err(format!("unknown optimizer `{other}`")),
        }
    }
}

/// First-order optimizer state. Adam moments mirror the parameter layout.
#[derive(Debug, Clone)]
pub struct OptimizerState<T> {
    mode: OptimizerMode,
    learning_rate: T,
    first_moment: Option<ParamSet<T>>,
    second_moment: Option<ParamSet<T>>,
    step: u64,
}

impl<T: Real> OptimizerState<T> {
    pub fn new(mode: OptimizerMode, learning_rate: T) -> Result<Self, GraphError> {
        if !(learning_rate > T::zero()) || !learning_rate.is_finite() {
            return Err(GraphError::LearningRate(learning_rate.to_f64_lossy()));
        }
        Ok(Self {
            mode,
            learning_rate,
            first_moment: None,
            second_moment: None,
            step: 0,
        })
    }

    pub fn mode(&self) -> OptimizerMode {
        self.mode
    }

    pub fn learning_rate(&self) -> T {
        self.learning_rate
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update. The L2 term `l2_coeff * theta` is added to the
    /// gradient before either rule.
    pub fn step(&mut self, params: &mut ParamSet<T>, grads: &ParamSet<T>, l2_coeff: T) -> Result<(), GraphError> {
        if params.len() != grads.len() {
            return Err(GraphError::ParamCount {
                expected: params.len(),
                actual: grads.len(),
            });
        }
        for (index, (p, g)) in params.tensors().iter().zip(grads.tensors()).enumerate() {
            if p.shape() != g.shape() {
                return Err(GraphError::ParamShape {
                    index,
                    expected: p.shape().to_vec(),
                    actual: g.shape().to_vec(),
                });
            }
            if !g.is_finite() {
                return Err(GraphError::NonFiniteUpdate { tensor: index });
            }
        }
        self.step += 1;
        let lr = self.learning_rate;
        match self.mode {
            OptimizerMode::Sgd => {
                for (p, g) in params.tensors_mut().iter_mut().zip(grads.tensors()) {
                    for (theta, grad) in p.values_mut().iter_mut().zip(g.values()) {
                        *theta = *theta - lr * (*grad + l2_coeff * *theta);
                    }
                }
            }
            OptimizerMode::Adam => {
                let (b1, b2, eps) = (T::lit(ADAM_BETA1), T::lit(ADAM_BETA2), T::lit(ADAM_EPSILON));
                let m = self.first_moment.get_or_insert_with(|| grads.zeros_like());
                let v = self.second_moment.get_or_insert_with(|| grads.zeros_like());
                let t = i32::try_from(self.step).unwrap_or(i32::MAX);
                let bias1 = T::one() - b1.powi(t);
                let bias2 = T::one() - b2.powi(t);
                for ((p, g), (mt, vt)) in params
                    .tensors_mut()
                    .iter_mut()
                    .zip(grads.tensors())
                    .zip(m.tensors_mut().iter_mut().zip(v.tensors_mut().iter_mut()))
                {
                    for (((theta, grad), mi), vi) in p
                        .values_mut()
                        .iter_mut()
                        .zip(g.values())
                        .zip(mt.values_mut())
                        .zip(vt.values_mut())
                    {
                        let grad = *grad + l2_coeff * *theta;
                        *mi = b1 * *mi + (T::one() - b1) * grad;
                        *vi = b2 * *vi + (T::one() - b2) * grad * grad;
                        let m_hat = *mi / bias1;
                        let v_hat = *vi / bias2;
                        *theta -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}

use rand::seq::index;
use rand::Rng;

use super::{DomainBox, GibbsError};
use crate::scalar::Real;

pub const DEFAULT_BUFFER_CAPACITY: usize = 10_000;

/// Persistent-chain store for contrastive training.
///
/// Slots start as uniform draws over the domain. Each cycle hands out a batch
/// of slot states (optionally swapping some for fresh uniform draws) and
/// receives the evolved states back into the same slots.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    domain: DomainBox<T>,
    capacity: usize,
    reinit_prob: f64,
    samples: Vec<Vec<T>>,
    writes: Vec<u64>,
    fresh_writes: Vec<u64>,
}

/// States handed out by [`ReplayBuffer::draw`].
#[derive(Debug, Clone)]
pub struct BufferDraw<T> {
    pub indices: Vec<usize>,
    pub states: Vec<Vec<T>>,
    /// Whether each state is a fresh uniform draw rather than the slot content.
    pub fresh: Vec<bool>,
}

impl<T: Real> ReplayBuffer<T> {
    pub fn new<R: Rng + ?Sized>(
        capacity: usize,
        domain: DomainBox<T>,
        reinit_prob: f64,
        rng: &mut R,
    ) -> Result<Self, GibbsError> {
        if capacity == 0 {
            return Err(GibbsError::Config("buffer capacity must be positive".into()));
        }
        if !(0.0..=1.0).contains(&reinit_prob) {
            return Err(GibbsError::Config(format!(
                "reinit probability {reinit_prob} outside [0, 1]"
            )));
        }
        let samples = (0..capacity).map(|_| domain.sample_uniform(rng)).collect();
        Ok(Self {
            domain,
            capacity,
            reinit_prob,
            samples,
            writes: vec![0; capacity],
            fresh_writes: vec![0; capacity],
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn reinit_prob(&self) -> f64 {
        self.reinit_prob
    }

    pub fn samples(&self) -> &[Vec<T>] {
        &self.samples
    }

    /// Number of store-backs per slot.
    pub fn writes(&self) -> &[u64] {
        &self.writes
    }

    /// Number of store-backs per slot whose chain began from a fresh draw.
    pub fn fresh_writes(&self) -> &[u64] {
        &self.fresh_writes
    }

    /// Picks `batch` distinct slots uniformly at random.
    pub fn draw<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<BufferDraw<T>, GibbsError> {
        if batch > self.capacity {
            return Err(GibbsError::BatchTooLarge {
                batch,
                capacity: self.capacity,
            });
        }
        let indices = index::sample(rng, self.capacity, batch).into_vec();
        let mut states = Vec::with_capacity(batch);
        let mut fresh = Vec::with_capacity(batch);
        for &i in &indices {
            let reinit = self.reinit_prob > 0.0 && rng.random::<f64>() < self.reinit_prob;
            if reinit {
                states.push(self.domain.sample_uniform(rng));
            } else {
                states.push(self.samples[i].clone());
            }
            fresh.push(reinit);
        }
        Ok(BufferDraw { indices, states, fresh })
    }

    /// Writes evolved states back into the slots they were drawn from.
    pub fn store(&mut self, draw: &BufferDraw<T>, evolved: &[Vec<T>]) -> Result<(), GibbsError> {
        if evolved.len() != draw.indices.len() {
            return Err(GibbsError::Config(format!(
                "store-back of {} states for {} drawn slots",
                evolved.len(),
                draw.indices.len()
            )));
        }
        for state in evolved {
            if state.len() != self.domain.dim() {
                return Err(GibbsError::Dimension {
                    expected: self.domain.dim(),
                    actual: state.len(),
                });
            }
            if let Some(index) = self.domain.violation(state) {
                return Err(GibbsError::OutOfDomain { index });
            }
        }
        for ((&slot, state), &fresh) in draw.indices.iter().zip(evolved).zip(&draw.fresh) {
            self.samples[slot].clone_from(state);
            self.writes[slot] += 1;
            if fresh {
                self.fresh_writes[slot] += 1;
            }
        }
        Ok(())
    }
}

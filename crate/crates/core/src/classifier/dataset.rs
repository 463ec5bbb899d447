use super::ClassifierError;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

/// Labeled examples in `[0, 1]^d`. Labels are 0-based class indices.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset<T> {
    input_shape: Vec<usize>,
    classes: usize,
    inputs: Vec<Vec<T>>,
    labels: Vec<usize>,
    splits: Vec<Split>,
}

impl<T: Real> LabeledDataset<T> {
    pub fn new(
        input_shape: Vec<usize>,
        classes: usize,
        inputs: Vec<Vec<T>>,
        labels: Vec<usize>,
        splits: Vec<Split>,
    ) -> Result<Self, ClassifierError> {
        if classes == 0 {
            return Err(ClassifierError::Config("a dataset needs at least one class".into()));
        }
        if inputs.len() != labels.len() || inputs.len() != splits.len() {
            return Err(ClassifierError::Config(format!(
                "{} inputs, {} labels and {} split tags",
                inputs.len(),
                labels.len(),
                splits.len()
            )));
        }
        let dim: usize = input_shape.iter().product();
        for (index, (x, &label)) in inputs.iter().zip(&labels).enumerate() {
            if x.len() != dim {
                return Err(ClassifierError::Dimension {
                    index,
                    expected: dim,
                    actual: x.len(),
                });
            }
            if label >= classes {
                return Err(ClassifierError::Label { index, label, classes });
            }
            if let Some(coord) = x.iter().position(|v| !(*v >= T::zero() && *v <= T::one())) {
                return Err(ClassifierError::OutOfDomain { index, coord });
            }
        }
        Ok(Self {
            input_shape,
            classes,
            inputs,
            labels,
            splits,
        })
    }

    pub fn empty(input_shape: Vec<usize>, classes: usize) -> Self {
        Self {
            input_shape,
            classes,
            inputs: Vec::new(),
            labels: Vec::new(),
            splits: Vec::new(),
        }
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn dim(&self) -> usize {
        self.input_shape.iter().product()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[Vec<T>] {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn splits(&self) -> &[Split] {
        &self.splits
    }

    /// Indices of the examples tagged `split`, in storage order.
    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.splits[i] == split).collect()
    }

    /// Inputs tagged `split`, in storage order.
    pub fn split_inputs(&self, split: Split) -> Vec<&[T]> {
        self.indices(split)
            .into_iter()
            .map(|i| self.inputs[i].as_slice())
            .collect()
    }

    pub fn class_counts(&self, split: Split) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for i in self.indices(split) {
            counts[self.labels[i]] += 1;
        }
        counts
    }

    /// Re-tags the last `test_fraction` of each class as test data.
    pub fn with_class_split(mut self, test_fraction: f64) -> Self {
        let mut seen = vec![0usize; self.classes];
        let totals: Vec<usize> = (0..self.classes)
            .map(|c| self.labels.iter().filter(|&&l| l == c).count())
            .collect();
        for i in 0..self.len() {
            let c = self.labels[i];
            let test_from = totals[c] - (test_fraction * totals[c] as f64).round() as usize;
            self.splits[i] = if seen[c] >= test_from {
                Split::Test
            } else {
                Split::Train
            };
            seen[c] += 1;
        }
        self
    }
}

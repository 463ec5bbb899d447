//! CIFAR-10 binary batches: 3073-byte records of one label byte followed by
//! the red, green and blue 32x32 planes in row-major order.

use std::path::Path;

use super::HarnessError;
use crate::classifier::{LabeledDataset, Split};

pub const CIFAR_RECORD_LEN: usize = 3073;
pub const CIFAR_CLASSES: usize = 10;
pub const CIFAR_SHAPE: [usize; 3] = [3, 32, 32];

/// One raw record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cifar10Record {
    pub label: u8,
    pub pixels: Vec<u8>,
}

pub fn parse_cifar10_records(bytes: &[u8]) -> Result<Vec<Cifar10Record>, HarnessError> {
    if !bytes.len().is_multiple_of(CIFAR_RECORD_LEN) {
        return Err(HarnessError::Cifar {
            record: bytes.len() / CIFAR_RECORD_LEN,
            reason: format!(
                "truncated: {} bytes is not a multiple of {CIFAR_RECORD_LEN}",
                bytes.len()
            ),
        });
    }
    bytes
        .chunks_exact(CIFAR_RECORD_LEN)
        .enumerate()
        .map(|(record, chunk)| {
            if usize::from(chunk[0]) >= CIFAR_CLASSES {
                return Err(HarnessError::Cifar {
                    record,
                    reason: format!("label {} outside 0..=9", chunk[0]),
                });
            }
            Ok(Cifar10Record {
                label: chunk[0],
                pixels: chunk[1..].to_vec(),
            })
        })
        .collect()
}

/// Parses a batch file's bytes, tagging every example with `split`.
pub fn parse_cifar10(bytes: &[u8], split: Split) -> Result<LabeledDataset<f64>, HarnessError> {
    let records = parse_cifar10_records(bytes)?;
    let n = records.len();
    let inputs = records
        .iter()
        .map(|r| r.pixels.iter().map(|b| f64::from(*b) / 255.0).collect())
        .collect();
    let labels = records.iter().map(|r| usize::from(r.label)).collect();
    Ok(LabeledDataset::new(
        CIFAR_SHAPE.to_vec(),
        CIFAR_CLASSES,
        inputs,
        labels,
        vec![split; n],
    )?)
}

/// Reads one batch file; all examples are tagged as training data.
pub fn ingest_cifar10(path: &Path) -> Result<LabeledDataset<f64>, HarnessError> {
    let bytes = std::fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    parse_cifar10(&bytes, Split::Train)
}

/// Inverse of [`parse_cifar10`] for datasets whose inputs are multiples of
/// 1/255.
pub fn serialize_cifar10(data: &LabeledDataset<f64>) -> Result<Vec<u8>, HarnessError> {
    if data.input_shape() != CIFAR_SHAPE {
        return Err(HarnessError::Dataset(format!(
            "input shape {:?} is not 3x32x32",
            data.input_shape()
        )));
    }
    let mut out = Vec::with_capacity(data.len() * CIFAR_RECORD_LEN);
    for (x, &label) in data.inputs().iter().zip(data.labels()) {
        out.push(label as u8);
        out.extend(x.iter().map(|v| (v * 255.0).round() as u8));
    }
    Ok(out)
}

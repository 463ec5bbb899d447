//! Little-endian binary tensor container shared by every artifact.
//!
//! Layout: magic `EBLB`, format version (`u32`), then for each tensor until
//! end of file: name length (`u32`), UTF-8 name, rank (`u32`), extents
//! (`u64` each), values (`f64` each).

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use crate::graph::ParamSet;
use crate::scalar::Real;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"EBLB";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic bytes {0:?}")]
    Magic([u8; 4]),
    #[error("unsupported format version {0}")]
    Version(u32),
    #[error("tensor {index}: {reason}")]
    Corrupt { index: usize, reason: String },
    #[error("missing tensor `{0}`")]
    Missing(String),
}

/// Ordered list of named `f64` tensors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    entries: Vec<(String, Tensor<f64>)>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push<T: Real>(&mut self, name: impl Into<String>, tensor: &Tensor<T>) {
        self.entries.push((name.into(), tensor.cast()));
    }

    pub fn push_scalar(&mut self, name: impl Into<String>, value: f64) {
        self.entries.push((name.into(), Tensor::scalar(value)));
    }

    pub fn push_params<T: Real>(&mut self, prefix: &str, params: &ParamSet<T>) {
        for (name, t) in params.names().iter().zip(params.tensors()) {
            self.push(format!("{prefix}{name}"), t);
        }
    }

    pub fn entries(&self) -> &[(String, Tensor<f64>)] {
        &self.entries
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<f64>, CheckpointError> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| CheckpointError::Missing(name.to_string()))
    }

    pub fn scalar(&self, name: &str) -> Result<f64, CheckpointError> {
        Ok(self.get(name)?.values()[0])
    }

    /// Collects tensors named `{prefix}{name}` for every name in `template`.
    pub fn params<T: Real>(&self, prefix: &str, template: &ParamSet<T>) -> Result<ParamSet<T>, CheckpointError> {
        let tensors = template
            .names()
            .iter()
            .map(|n| self.get(&format!("{prefix}{n}")).map(Tensor::cast))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ParamSet::new(template.names().to_vec(), tensors))
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), CheckpointError> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        for (name, tensor) in &self.entries {
            let name_len = u32::try_from(name.len()).map_err(|_| CheckpointError::Corrupt {
                index: 0,
                reason: "name too long".into(),
            })?;
            w.write_all(&name_len.to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&(tensor.shape().len() as u32).to_le_bytes())?;
            for &e in tensor.shape() {
                w.write_all(&(e as u64).to_le_bytes())?;
            }
            for v in tensor.values() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, CheckpointError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let mut cur = Cursor { bytes, pos: 0 };
        let magic: [u8; 4] = cur
            .take(4)
            .map_err(|_| CheckpointError::Magic([0; 4]))?
            .try_into()
            .expect("4 bytes");
        if &magic != MAGIC {
            return Err(CheckpointError::Magic(magic));
        }
        let version = cur.u32().map_err(|_| CheckpointError::Version(0))?;
        if version != FORMAT_VERSION {
            return Err(CheckpointError::Version(version));
        }
        let mut entries = Vec::new();
        while cur.pos < bytes.len() {
            let index = entries.len();
            let corrupt = |reason: &str| CheckpointError::Corrupt {
                index,
                reason: reason.to_string(),
            };
            let name_len = cur.u32().map_err(|_| corrupt("truncated name length"))? as usize;
            let name = std::str::from_utf8(cur.take(name_len).map_err(|_| corrupt("truncated name"))?)
                .map_err(|_| corrupt("name is not UTF-8"))?
                .to_string();
            let rank = cur.u32().map_err(|_| corrupt("truncated rank"))? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                let e = cur.u64().map_err(|_| corrupt("truncated extents"))?;
                shape.push(usize::try_from(e).map_err(|_| corrupt("extent overflow"))?);
            }
            let numel = shape
                .iter()
                .try_fold(1usize, |acc, &e| acc.checked_mul(e))
                .ok_or_else(|| corrupt("extent overflow"))?;
            let raw = cur
                .take(numel.checked_mul(8).ok_or_else(|| corrupt("extent overflow"))?)
                .map_err(|_| corrupt("truncated values"))?;
            let values = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            let tensor = Tensor::new(shape, values).map_err(|e| corrupt(&e.to_string()))?;
            entries.push((name, tensor));
        }
        Ok(Self { entries })
    }

    /// Writes to a temporary sibling and renames it into place.
    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        crate::io_util::write_atomic(path, &self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        Self::from_bytes(&fs::read(path)?)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ()> {
        let end = self.pos.checked_add(n).ok_or(())?;
        if end > self.bytes.len() {
            return Err(());
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, ()> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, ()> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout_is_fixed() {
        let mut ck = Checkpoint::new();
        ck.push("w", &Tensor::new(vec![1, 2], vec![1.5f64, -2.0]).unwrap());
        let bytes = ck.to_bytes();
        assert_eq!(&bytes[..4], b"EBLB");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &1u32.to_le_bytes()); // name length
        assert_eq!(bytes[12], b'w');
        assert_eq!(&bytes[13..17], &2u32.to_le_bytes()); // rank
        assert_eq!(&bytes[17..25], &1u64.to_le_bytes());
        assert_eq!(&bytes[25..33], &2u64.to_le_bytes());
        assert_eq!(&bytes[33..41], &1.5f64.to_le_bytes());
        assert_eq!(bytes.len(), 49);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        assert!(matches!(
            Checkpoint::from_bytes(b"NOPE\x01\0\0\0"),
            Err(CheckpointError::Magic(_))
        ));
        let mut ck = Checkpoint::new();
        ck.push_scalar("beta", 2.0);
        let bytes = ck.to_bytes();
        assert!(matches!(
            Checkpoint::from_bytes(&bytes[..bytes.len() - 1]),
            Err(CheckpointError::Corrupt { index: 0, .. })
        ));
    }

    proptest! {
        #[test]
        fn round_trips(values in proptest::collection::vec(-1e6f64..1e6, 1..40), name in "[a-z.0-9]{1,12}") {
            let mut ck = Checkpoint::new();
            let n = values.len();
            ck.push(name.clone(), &Tensor::new(vec![n], values).unwrap());
            ck.push_scalar("meta", 3.0);
            let back = Checkpoint::from_bytes(&ck.to_bytes()).unwrap();
            prop_assert_eq!(&back, &ck);
            prop_assert_eq!(back.to_bytes(), ck.to_bytes());
        }
    }
}

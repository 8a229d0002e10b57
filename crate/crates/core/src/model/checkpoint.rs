//! Binary checkpoint format, all integers and floats little-endian:
//!
//! ```text
//! magic           16 bytes  "EPEE-MULTIEXIT\0\x01"
//! field count     u32
//! per field       u32 name length, UTF-8 name, u64 value
//! matrix count    u32
//! per matrix      u64 rows, u64 cols, rows*cols f64 (row-major)
//! ```
//!
//! Config fields appear in `ModelConfig` declaration order and matrices in
//! parameter declaration order.

use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{ModelConfig, MultiExitModel};
use crate::scalar::Scalar;
use crate::tensor::Matrix;

pub const MAGIC: &[u8; 16] = b"EPEE-MULTIEXIT\0\x01";

const FIELDS: [&str; 8] = [
    "vocab_size",
    "num_layers",
    "hidden_dim",
    "num_heads",
    "ffn_dim",
    "num_classes",
    "max_seq_len",
    "seed",
];

fn field_values(c: &ModelConfig) -> [u64; 8] {
    [
        c.vocab_size as u64,
        c.num_layers as u64,
        c.hidden_dim as u64,
        c.num_heads as u64,
        c.ffn_dim as u64,
        c.num_classes as u64,
        c.max_seq_len as u64,
        c.seed,
    ]
}

pub fn to_bytes<T: Scalar>(model: &MultiExitModel<T>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(FIELDS.len() as u32).to_le_bytes());
    for (name, value) in FIELDS.iter().zip(field_values(model.config())) {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&value.to_le_bytes());
    }
    out.extend_from_slice(&(model.params().len() as u32).to_le_bytes());
    for p in model.params() {
        out.extend_from_slice(&(p.value.rows() as u64).to_le_bytes());
        out.extend_from_slice(&(p.value.cols() as u64).to_le_bytes());
        for x in p.value.data() {
            out.extend_from_slice(&x.as_f64().to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn from_bytes<T: Scalar>(bytes: &[u8]) -> Result<MultiExitModel<T>> {
    let mut cur = Cursor { buf: bytes, pos: 0 };
    if cur.take(16)? != MAGIC {
        return Err(Error::Checkpoint("bad magic header".into()));
    }
    let n_fields = cur.u32()? as usize;
    if n_fields != FIELDS.len() {
        return Err(Error::Checkpoint(format!(
            "expected {} config fields, found {n_fields}",
            FIELDS.len()
        )));
    }
    let mut values = [0u64; 8];
    for (expected, slot) in FIELDS.iter().zip(values.iter_mut()) {
        let len = cur.u32()? as usize;
        let name = cur.take(len)?;
        if name != expected.as_bytes() {
            return Err(Error::Checkpoint(format!(
                "expected field {expected}, found {:?}",
                String::from_utf8_lossy(name)
            )));
        }
        *slot = cur.u64()?;
    }
    let count = |v: u64| usize::try_from(v).map_err(|_| Error::Checkpoint("count overflows usize".into()));
    let config = ModelConfig {
        vocab_size: count(values[0])?,
        num_layers: count(values[1])?,
        hidden_dim: count(values[2])?,
        num_heads: count(values[3])?,
        ffn_dim: count(values[4])?,
        num_classes: count(values[5])?,
        max_seq_len: count(values[6])?,
        seed: values[7],
    };
    config.validate().map_err(|e| Error::Checkpoint(e.to_string()))?;

    let n_mats = cur.u32()? as usize;
    let mut mats = Vec::with_capacity(n_mats.min(1024));
    for _ in 0..n_mats {
        let rows = count(cur.u64()?)?;
        let cols = count(cur.u64()?)?;
        let len = rows
            .checked_mul(cols)
            .filter(|&l| l <= bytes.len() / 8)
            .ok_or_else(|| Error::Checkpoint("matrix larger than file".into()))?;
        let data = (0..len).map(|_| cur.f64().map(T::of)).collect::<Result<Vec<_>>>()?;
        mats.push(Matrix::from_vec(rows, cols, data)?);
    }
    if cur.pos != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - cur.pos)));
    }
    MultiExitModel::from_params(config, mats)
}

pub fn save<T: Scalar>(model: &MultiExitModel<T>, path: &Path) -> Result<()> {
    std::fs::write(path, to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load<T: Scalar>(path: &Path) -> Result<MultiExitModel<T>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

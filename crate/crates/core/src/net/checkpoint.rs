//! Binary parameter checkpoints.
//!
//! Layout (all integers little-endian):
//!   bytes 0–7    magic `PANELNET`
//!   bytes 8–11   format version, u32 (currently 1)
//!   bytes 12–35  input_size, lstm_hidden, gru_hidden as u64
//!   bytes 36–43  dropout_rate as raw f64 bits
//!   bytes 44–51  training seed, u64
//!   rest         all 23 parameter tensors in canonical order
//!                ([`NetworkParams::tensors`]), row-major, raw f64 bits
//!
//! Values travel as raw bits, so a write/read round trip is bit-exact.

use std::path::Path;

use thiserror::Error;

use super::{NetworkParams, NetworkShape};

pub const MAGIC: [u8; 8] = *b"PANELNET";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0} (expected {VERSION})")]
    UnsupportedVersion(u32),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
}

/// Serializes parameters plus the seed they were trained with.
pub fn save_checkpoint(
    params: &NetworkParams,
    seed: u64,
    path: impl AsRef<Path>,
) -> Result<(), CheckpointError> {
    let shape = params.shape;
    let mut buf = Vec::with_capacity(52 + 8 * params.n_parameters());
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    for size in [shape.input_size, shape.lstm_hidden, shape.gru_hidden] {
        buf.extend_from_slice(&(size as u64).to_le_bytes());
    }
    buf.extend_from_slice(&shape.dropout_rate.to_bits().to_le_bytes());
    buf.extend_from_slice(&seed.to_le_bytes());
    for tensor in params.tensors() {
        for &v in tensor {
            buf.extend_from_slice(&v.to_bits().to_le_bytes());
        }
    }
    std::fs::write(path.as_ref(), buf).map_err(|source| CheckpointError::Io {
        path: path.as_ref().display().to_string(),
        source,
    })
}

/// Reads a checkpoint back, returning the parameters and the stored seed.
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(NetworkParams, u64), CheckpointError> {
    let path = path.as_ref();
    let data = std::fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;

    let mut r = Reader {
        data: &data,
        pos: 0,
    };
    if r.take(8)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }

    let input_size = r.take_u64()? as usize;
    let lstm_hidden = r.take_u64()? as usize;
    let gru_hidden = r.take_u64()? as usize;
    if input_size == 0 || lstm_hidden == 0 || gru_hidden == 0 {
        return Err(CheckpointError::Corrupt("zero layer size".into()));
    }
    let dropout_rate = f64::from_bits(r.take_u64()?);
    if !(0.0..1.0).contains(&dropout_rate) {
        return Err(CheckpointError::Corrupt(format!(
            "dropout rate {dropout_rate} out of [0,1)"
        )));
    }
    let seed = r.take_u64()?;

    let shape = NetworkShape {
        input_size,
        lstm_hidden,
        gru_hidden,
        dropout_rate,
    };
    let mut params = NetworkParams::zeros(shape);
    for tensor in params.tensors_mut() {
        for v in tensor.iter_mut() {
            *v = f64::from_bits(r.take_u64()?);
        }
    }
    if r.pos != data.len() {
        return Err(CheckpointError::Corrupt(format!(
            "{} trailing bytes after parameter data",
            data.len() - r.pos
        )));
    }
    Ok((params, seed))
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos + n;
        let chunk = self.data.get(self.pos..end).ok_or_else(|| {
            CheckpointError::Corrupt(format!("file truncated at byte {}", self.pos))
        })?;
        self.pos = end;
        Ok(chunk)
    }

    fn take_u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}

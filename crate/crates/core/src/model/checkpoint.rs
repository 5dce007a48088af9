//! Binary checkpoint: `SLRTCKPT`, `u32` version, the model config, every
//! parameter tensor in declaration order (`u32` rank, `u32` dims, `f32`
//! values, all little-endian), then the class label table.
//!
//! Parameters produced by [`super::init_params`] and the trainer are kept on
//! the `f32` grid, so saving and loading them is exact.

use super::{ModelConfig, ModelError, Tensor, TransformerParameters};

const MAGIC: &[u8; 8] = b"SLRTCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub params: TransformerParameters,
    /// Word id of each class index.
    pub labels: Vec<String>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + 4 * self.params.num_values());
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, FORMAT_VERSION);
        let c = &self.config;
        for v in [c.input_dim, c.d_model, c.n_layers, c.n_heads, c.d_ff, c.n_classes, c.max_frames] {
            put_u32(&mut out, v as u32);
        }
        out.extend_from_slice(&c.dropout.to_le_bytes());

        let tensors = self.params.tensors();
        put_u32(&mut out, tensors.len() as u32);
        for t in tensors {
            put_u32(&mut out, t.shape.len() as u32);
            for &dim in &t.shape {
                put_u32(&mut out, dim as u32);
            }
            for &v in &t.data {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }

        put_u32(&mut out, self.labels.len() as u32);
        for label in &self.labels {
            put_u32(&mut out, label.len() as u32);
            out.extend_from_slice(label.as_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        let mut r = Reader { bytes, at: 0 };
        if r.take(8)? != MAGIC {
            return Err(ModelError::Checkpoint("not a checkpoint (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(ModelError::Checkpoint(format!("unsupported format version {version}")));
        }
        let mut dims = [0usize; 7];
        for d in &mut dims {
            *d = r.u32()? as usize;
        }
        let dropout = f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
        let config = ModelConfig {
            input_dim: dims[0],
            d_model: dims[1],
            n_layers: dims[2],
            n_heads: dims[3],
            d_ff: dims[4],
            n_classes: dims[5],
            max_frames: dims[6],
            dropout,
        };
        config.validate()?;

        let mut params = TransformerParameters::zeros(&config);
        let count = r.u32()? as usize;
        let slots = params.tensors_mut();
        if count != slots.len() {
            return Err(ModelError::Checkpoint(format!(
                "{count} tensors stored, config implies {}",
                slots.len()
            )));
        }
        for (i, slot) in slots.into_iter().enumerate() {
            let rank = r.u32()? as usize;
            let shape = (0..rank).map(|_| r.u32().map(|v| v as usize)).collect::<Result<Vec<_>, _>>()?;
            if shape != slot.shape {
                return Err(ModelError::Checkpoint(format!(
                    "tensor {i}: stored shape {shape:?}, expected {:?}",
                    slot.shape
                )));
            }
            let raw = r.take(4 * slot.len())?;
            *slot = Tensor {
                shape,
                data: raw
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
                    .collect(),
            };
        }
        if !params.is_finite() {
            return Err(ModelError::Checkpoint("non-finite parameter".into()));
        }

        let n_labels = r.u32()? as usize;
        let mut labels = Vec::with_capacity(n_labels);
        for _ in 0..n_labels {
            let len = r.u32()? as usize;
            let s = std::str::from_utf8(r.take(len)?)
                .map_err(|_| ModelError::Checkpoint("label is not utf-8".into()))?;
            labels.push(s.to_string());
        }
        if n_labels != 0 && n_labels != config.n_classes {
            return Err(ModelError::Checkpoint(format!(
                "{n_labels} labels for {} classes",
                config.n_classes
            )));
        }
        if r.at != bytes.len() {
            return Err(ModelError::Checkpoint("trailing bytes".into()));
        }
        Ok(Checkpoint { config, params, labels })
    }
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        let end = self
            .at
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| ModelError::Checkpoint("truncated checkpoint".into()))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

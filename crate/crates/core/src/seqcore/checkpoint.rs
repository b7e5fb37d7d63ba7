//! Single-file checkpoints: a JSON manifest followed by a raw tensor payload.
//!
//! Layout: 8-byte magic `PYRFIXCK`, little-endian `u64` manifest length, the
//! manifest JSON, then the payload. Tensors are row-major little-endian
//! IEEE-754 values at the offsets listed in the manifest.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::matrix::Matrix;
use super::params::ParamStore;
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"PYRFIXCK";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    dtype: Dtype,
    shape: Vec<usize>,
    offset: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    config: ModelConfig,
    vocab_hash: String,
    #[serde(default)]
    metadata: serde_json::Value,
    tensors: Vec<TensorEntry>,
}

/// Everything a checkpoint file holds.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub vocab_hash: String,
    /// Free-form run state (epoch counter, seeds, head sizes).
    pub metadata: serde_json::Value,
    pub tensors: Vec<(String, Matrix)>,
}

impl Checkpoint {
    pub fn from_params(
        config: ModelConfig,
        vocab_hash: impl Into<String>,
        params: &ParamStore,
    ) -> Self {
        Checkpoint {
            config,
            vocab_hash: vocab_hash.into(),
            metadata: serde_json::Value::Null,
            tensors: params
                .iter()
                .map(|(_, p)| (p.name.clone(), p.value.clone()))
                .collect(),
        }
    }

    pub fn tensor(&self, name: &str) -> Option<&Matrix> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    /// Copies tensors into `params`, requiring every parameter to be present
    /// with the same shape.
    pub fn restore_into(&self, params: &mut ParamStore) -> Result<()> {
        let names: Vec<String> = params.iter().map(|(_, p)| p.name.clone()).collect();
        for name in names {
            let m = self
                .tensor(&name)
                .ok_or_else(|| Error::CheckpointCorrupt(format!("missing tensor {name}")))?;
            params.assign(&name, m.clone())?;
        }
        Ok(())
    }

    /// `Some(warning)` when the checkpoint was trained with a different
    /// vocabulary.
    pub fn vocab_warning(&self, current_hash: &str) -> Option<String> {
        (self.vocab_hash != current_hash).then(|| {
            format!(
                "checkpoint vocabulary hash {} differs from current vocabulary {}",
                short(&self.vocab_hash),
                short(current_hash)
            )
        })
    }
}

fn short(h: &str) -> &str {
    &h[..h.len().min(12)]
}

pub fn save_checkpoint(ckpt: &Checkpoint, dtype: Dtype, path: &Path) -> Result<()> {
    fs::write(path, encode(ckpt, dtype)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    decode(&fs::read(path)?)
}

pub fn encode(ckpt: &Checkpoint, dtype: Dtype) -> Result<Vec<u8>> {
    let mut payload = Vec::new();
    let mut tensors = Vec::with_capacity(ckpt.tensors.len());
    for (name, m) in &ckpt.tensors {
        tensors.push(TensorEntry {
            name: name.clone(),
            dtype,
            shape: vec![m.rows(), m.cols()],
            offset: payload.len(),
        });
        match dtype {
            Dtype::F32 => {
                for &v in m.data() {
                    payload.extend_from_slice(&(v as f32).to_le_bytes());
                }
            }
            Dtype::F64 => {
                for &v in m.data() {
                    payload.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        config: ckpt.config.clone(),
        vocab_hash: ckpt.vocab_hash.clone(),
        metadata: ckpt.metadata.clone(),
        tensors,
    };
    let json = serde_json::to_vec(&manifest)?;
    let mut out = Vec::with_capacity(16 + json.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    let corrupt = |m: &str| Error::CheckpointCorrupt(m.to_string());
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(corrupt("missing header"));
    }
    let mlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let body = &bytes[16..];
    if mlen > body.len() {
        return Err(corrupt("truncated manifest"));
    }
    let raw: serde_json::Value = serde_json::from_slice(&body[..mlen])
        .map_err(|e| Error::CheckpointCorrupt(format!("manifest: {e}")))?;
    let version = raw.get("format_version").and_then(|v| v.as_u64());
    if version != Some(FORMAT_VERSION as u64) {
        return Err(Error::CheckpointVersion {
            found: version.unwrap_or(0) as u32,
            expected: FORMAT_VERSION,
        });
    }
    let manifest: Manifest = serde_json::from_value(raw)
        .map_err(|e| Error::CheckpointCorrupt(format!("manifest: {e}")))?;
    let payload = &body[mlen..];
    let mut tensors = Vec::with_capacity(manifest.tensors.len());
    let mut expected_offset = 0;
    for t in &manifest.tensors {
        if t.shape.len() != 2 {
            return Err(Error::CheckpointShape {
                name: t.name.clone(),
                found: t.shape.clone(),
                expected: vec![0, 0],
            });
        }
        if t.offset != expected_offset {
            return Err(corrupt(&format!("tensor {} has inconsistent offset", t.name)));
        }
        let n = t.shape[0] * t.shape[1];
        let nbytes = n * t.dtype.size();
        let end = t.offset + nbytes;
        if end > payload.len() {
            return Err(corrupt(&format!("truncated payload in tensor {}", t.name)));
        }
        let raw = &payload[t.offset..end];
        let data: Vec<f64> = match t.dtype {
            Dtype::F32 => raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect(),
            Dtype::F64 => raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        };
        tensors.push((t.name.clone(), Matrix::from_vec(t.shape[0], t.shape[1], data)));
        expected_offset = end;
    }
    if expected_offset != payload.len() {
        return Err(corrupt("trailing bytes after payload"));
    }
    Ok(Checkpoint {
        config: manifest.config,
        vocab_hash: manifest.vocab_hash,
        metadata: manifest.metadata,
        tensors,
    })
}

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use candle_core::{DType, Device, Tensor};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::archive::{read_archive, write_archive};
use crate::error::{Error, Result};
use crate::nn::ParamStore;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"S2PCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Shape,
    Content,
}

/// Position of a ChaCha stream, enough to resume it exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        Self { seed: rng.get_seed(), stream: rng.get_stream(), word_pos: rng.get_word_pos() }
    }

    pub fn restore(&self) -> ChaCha8Rng {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos);
        rng
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BlobMeta {
    name: String,
    shape: Vec<usize>,
    dtype: String,
    offset: usize,
    len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamBlob {
    pub shape: Vec<usize>,
    pub dtype: DType,
    /// Little-endian element bytes.
    pub bytes: Vec<u8>,
}

/// Named parameters plus everything needed to rebuild the networks.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub stage: Stage,
    pub epoch: u64,
    pub step: u64,
    pub params: BTreeMap<String, ParamBlob>,
    /// Network layout (widths, block counts) as JSON.
    pub net_config: serde_json::Value,
    /// Resolved run configuration, verbatim.
    pub config: String,
    pub rng: Option<RngState>,
}

fn dtype_name(d: DType) -> Result<&'static str> {
    match d {
        DType::F32 => Ok("f32"),
        DType::F64 => Ok("f64"),
        other => Err(Error::Config(format!("unsupported parameter dtype {other:?}"))),
    }
}

fn dtype_from(name: &str) -> Result<(DType, usize)> {
    match name {
        "f32" => Ok((DType::F32, 4)),
        "f64" => Ok((DType::F64, 8)),
        other => Err(Error::Integrity(format!("unknown dtype {other}"))),
    }
}

fn tensor_bytes(t: &Tensor) -> Result<Vec<u8>> {
    let flat = t.flatten_all()?;
    Ok(match t.dtype() {
        DType::F32 => flat.to_vec1::<f32>()?.iter().flat_map(|v| v.to_le_bytes()).collect(),
        DType::F64 => flat.to_vec1::<f64>()?.iter().flat_map(|v| v.to_le_bytes()).collect(),
        other => return Err(Error::Config(format!("unsupported parameter dtype {other:?}"))),
    })
}

impl ParamBlob {
    pub fn to_tensor(&self, device: &Device) -> Result<Tensor> {
        let t = match self.dtype {
            DType::F32 => {
                let v: Vec<f32> =
                    self.bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
                Tensor::from_vec(v, self.shape.as_slice(), device)?
            }
            _ => {
                let v: Vec<f64> =
                    self.bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
                Tensor::from_vec(v, self.shape.as_slice(), device)?
            }
        };
        Ok(t)
    }
}

impl Checkpoint {
    pub fn capture(
        stage: Stage,
        epoch: u64,
        step: u64,
        store: &ParamStore,
        net_config: serde_json::Value,
        config: String,
        rng: Option<RngState>,
    ) -> Result<Self> {
        let mut params = BTreeMap::new();
        for (name, var) in store.named() {
            let t = var.as_tensor();
            dtype_name(t.dtype())?;
            params.insert(
                name.clone(),
                ParamBlob { shape: t.dims().to_vec(), dtype: t.dtype(), bytes: tensor_bytes(t)? },
            );
        }
        Ok(Self { stage, epoch, step, params, net_config, config, rng })
    }

    /// Overwrite `store` with the saved parameters (names and shapes must match).
    pub fn apply(&self, store: &ParamStore) -> Result<()> {
        let tensors = self
            .params
            .iter()
            .map(|(k, b)| Ok((k.clone(), b.to_tensor(store.device())?)))
            .collect::<Result<HashMap<_, _>>>()?;
        store.assign(&tensors)
    }

    pub fn expect_stage(&self, stage: Stage) -> Result<()> {
        if self.stage != stage {
            return Err(Error::Config(format!("expected a {stage:?} checkpoint, found {:?}", self.stage)));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut payload = Vec::new();
        let mut metas = Vec::with_capacity(self.params.len());
        for (name, blob) in &self.params {
            metas.push(BlobMeta {
                name: name.clone(),
                shape: blob.shape.clone(),
                dtype: dtype_name(blob.dtype)?.into(),
                offset: payload.len(),
                len: blob.bytes.len(),
            });
            payload.extend_from_slice(&blob.bytes);
        }
        let header = serde_json::json!({
            "stage": self.stage,
            "epoch": self.epoch,
            "step": self.step,
            "params": metas,
            "net_config": self.net_config,
            "config": self.config,
            "rng": self.rng,
        });
        write_archive(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, &header, &payload)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (header, payload) = read_archive(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, bytes)?;
        let field = |k: &str| header.get(k).cloned().ok_or_else(|| Error::Integrity(format!("checkpoint header lacks {k}")));
        let metas: Vec<BlobMeta> = serde_json::from_value(field("params")?)?;
        let mut params = BTreeMap::new();
        for m in metas {
            let (dtype, width) = dtype_from(&m.dtype)?;
            let count: usize = m.shape.iter().product();
            let end = m.offset.checked_add(m.len).filter(|&e| e <= payload.len());
            if end.is_none() || m.len != count * width {
                return Err(Error::Integrity(format!("parameter {} has an inconsistent extent", m.name)));
            }
            let bytes = payload[m.offset..m.offset + m.len].to_vec();
            params.insert(m.name, ParamBlob { shape: m.shape, dtype, bytes });
        }
        Ok(Self {
            stage: serde_json::from_value(field("stage")?)?,
            epoch: serde_json::from_value(field("epoch")?)?,
            step: serde_json::from_value(field("step")?)?,
            params,
            net_config: field("net_config")?,
            config: serde_json::from_value(field("config")?)?,
            rng: serde_json::from_value(field("rng")?)?,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_bytes()?)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::Config(format!("checkpoint {}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }
}

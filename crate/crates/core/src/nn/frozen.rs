use std::collections::HashMap;
use std::path::Path;

use candle_core::{DType, Device, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// What a named tensor is, so random stand-ins can be initialized sensibly.
#[derive(Debug, Clone, Copy)]
pub enum WeightKind {
    /// Convolution kernel; He-normal when random.
    Conv,
    Zeros,
    Ones,
}

/// Non-trainable weights for pretrained extractors: either loaded from a
/// safetensors file (torchvision key names) or generated from a seed for
/// tests and smoke runs.
pub struct FrozenWeights {
    tensors: Option<HashMap<String, Tensor>>,
    rng: ChaCha8Rng,
    device: Device,
    dtype: DType,
    id: String,
}

impl FrozenWeights {
    pub fn load(path: impl AsRef<Path>, device: &Device, dtype: DType) -> Result<Self> {
        let path = path.as_ref();
        if !path.is_file() {
            return Err(Error::Config(format!("weights file {} not found", path.display())));
        }
        let tensors = candle_core::safetensors::load(path, device)?;
        Ok(Self {
            tensors: Some(tensors),
            rng: ChaCha8Rng::seed_from_u64(0),
            device: device.clone(),
            dtype,
            id: path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
        })
    }

    pub fn random(seed: u64, device: &Device, dtype: DType) -> Self {
        Self {
            tensors: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
            device: device.clone(),
            dtype,
            id: format!("random-{seed}"),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn is_random(&self) -> bool {
        self.tensors.is_none()
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn get(&mut self, name: &str, shape: &[usize], kind: WeightKind) -> Result<Tensor> {
        if let Some(map) = &self.tensors {
            let t = map
                .get(name)
                .ok_or_else(|| Error::Config(format!("weights file {} lacks {name}", self.id)))?;
            if t.dims() != shape {
                return Err(Error::Shape(format!(
                    "weight {name}: file has {:?}, architecture needs {shape:?}",
                    t.dims()
                )));
            }
            return Ok(t.to_dtype(self.dtype)?);
        }
        let n: usize = shape.iter().product();
        let values: Vec<f64> = match kind {
            WeightKind::Zeros => vec![0.0; n],
            WeightKind::Ones => vec![1.0; n],
            WeightKind::Conv => {
                let fan_in: usize = shape[1..].iter().product::<usize>().max(1);
                let dist = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("finite std");
                (0..n).map(|_| dist.sample(&mut self.rng)).collect()
            }
        };
        Ok(Tensor::from_vec(values, shape, &self.device)?.to_dtype(self.dtype)?)
    }
}

/// Inference-mode batch normalization.
#[derive(Debug, Clone)]
pub struct BatchNorm {
    scale: Tensor,
    shift: Tensor,
}

impl BatchNorm {
    pub fn load(w: &mut FrozenWeights, prefix: &str, channels: usize, eps: f64) -> Result<Self> {
        let weight = w.get(&format!("{prefix}.weight"), &[channels], WeightKind::Ones)?;
        let bias = w.get(&format!("{prefix}.bias"), &[channels], WeightKind::Zeros)?;
        let mean = w.get(&format!("{prefix}.running_mean"), &[channels], WeightKind::Zeros)?;
        let var = w.get(&format!("{prefix}.running_var"), &[channels], WeightKind::Ones)?;
        let scale = weight.div(&(var + eps)?.sqrt()?)?;
        let shift = (bias - mean.mul(&scale)?)?;
        Ok(Self {
            scale: scale.reshape((1, channels, 1, 1))?,
            shift: shift.reshape((1, channels, 1, 1))?,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(x.broadcast_mul(&self.scale)?.broadcast_add(&self.shift)?)
    }
}

/// Zero padding with separate vertical/horizontal amounts, then a convolution.
pub fn conv_padded(x: &Tensor, weight: &Tensor, stride: usize, pad: (usize, usize)) -> Result<Tensor> {
    let mut x = x.clone();
    if pad.0 > 0 {
        x = x.pad_with_zeros(2, pad.0, pad.0)?;
    }
    if pad.1 > 0 {
        x = x.pad_with_zeros(3, pad.1, pad.1)?;
    }
    super::conv2d(&x, weight, 0, stride)
}

/// ImageNet channel normalization of a `[0,1]` RGB batch.
pub fn imagenet_normalize(x: &Tensor) -> Result<Tensor> {
    let dev = x.device();
    let mean = Tensor::new(&[0.485f32, 0.456, 0.406], dev)?.to_dtype(x.dtype())?.reshape((1, 3, 1, 1))?;
    let std = Tensor::new(&[0.229f32, 0.224, 0.225], dev)?.to_dtype(x.dtype())?.reshape((1, 3, 1, 1))?;
    Ok(x.broadcast_sub(&mean)?.broadcast_div(&std)?)
}

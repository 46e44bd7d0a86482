//! VGG feature stacks (torchvision `features.N.*` key layout). VGG-19 taps
//! feed the style loss; VGG-16 taps feed the LPIPS metric.

use std::path::Path;

use candle_core::{DType, Device, Tensor};

use super::frozen::{imagenet_normalize, FrozenWeights, WeightKind};
use super::{Conv2d, Padding};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VggArch {
    Vgg16,
    Vgg19,
}

impl VggArch {
    /// Convolutions per block.
    fn blocks(self) -> [usize; 5] {
        match self {
            VggArch::Vgg16 => [2, 2, 3, 3, 3],
            VggArch::Vgg19 => [2, 2, 4, 4, 4],
        }
    }
}

pub const VGG_WIDTHS: [usize; 5] = [64, 128, 256, 512, 512];

/// Style layers of VGG-19.
pub const STYLE_LAYERS: [&str; 4] = ["relu1_1", "relu2_1", "relu3_1", "relu4_1"];
/// LPIPS taps of VGG-16.
pub const LPIPS_LAYERS: [&str; 5] = ["relu1_2", "relu2_2", "relu3_3", "relu4_3", "relu5_3"];

#[derive(Debug, Clone)]
enum Layer {
    Conv { conv: Conv2d, name: String },
    Pool,
}

/// Frozen VGG trunk returning the activations at the requested ReLU taps.
#[derive(Debug, Clone)]
pub struct VggFeatures {
    layers: Vec<Layer>,
    taps: Vec<String>,
    id: String,
}

impl VggFeatures {
    /// `width_divisor` > 1 shrinks every layer (only meaningful for random weights).
    pub fn build(
        weights: &mut FrozenWeights,
        arch: VggArch,
        taps: &[&str],
        width_divisor: usize,
    ) -> Result<Self> {
        if width_divisor == 0 || (width_divisor > 1 && !weights.is_random()) {
            return Err(Error::Config("pretrained VGG weights require full widths".into()));
        }
        let mut layers = Vec::new();
        let mut idx = 0usize;
        let mut in_ch = 3;
        let mut remaining: Vec<&str> = taps.to_vec();
        'outer: for (b, &n) in arch.blocks().iter().enumerate() {
            let width = (VGG_WIDTHS[b] / width_divisor).max(1);
            for k in 0..n {
                let w = weights.get(
                    &format!("features.{idx}.weight"),
                    &[width, in_ch, 3, 3],
                    WeightKind::Conv,
                )?;
                let bias = weights.get(&format!("features.{idx}.bias"), &[width], WeightKind::Zeros)?;
                let name = format!("relu{}_{}", b + 1, k + 1);
                remaining.retain(|t| *t != name);
                layers.push(Layer::Conv {
                    conv: Conv2d::from_tensors(w, Some(bias), 1, Padding::Zeros(1)),
                    name,
                });
                in_ch = width;
                idx += 2;
                if remaining.is_empty() {
                    break 'outer;
                }
            }
            layers.push(Layer::Pool);
            idx += 1;
        }
        if !remaining.is_empty() {
            return Err(Error::Config(format!("unknown VGG taps {remaining:?}")));
        }
        let id = format!("{arch:?}:{}", weights.id()).to_lowercase();
        Ok(Self { layers, taps: taps.iter().map(|s| s.to_string()).collect(), id })
    }

    /// VGG-19 up to `relu4_1` from a safetensors file.
    pub fn style_extractor(path: impl AsRef<Path>, device: &Device, dtype: DType) -> Result<Self> {
        let mut w = FrozenWeights::load(path, device, dtype)?;
        Self::build(&mut w, VggArch::Vgg19, &STYLE_LAYERS, 1)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// Activations at each tap, in tap order, for a `[0,1]` RGB batch.
    pub fn forward(&self, x: &Tensor) -> Result<Vec<Tensor>> {
        let mut h = imagenet_normalize(x)?;
        let mut out: Vec<Option<Tensor>> = vec![None; self.taps.len()];
        for layer in &self.layers {
            match layer {
                Layer::Conv { conv, name } => {
                    h = conv.forward(&h)?.relu()?;
                    if let Some(i) = self.taps.iter().position(|t| t == name) {
                        out[i] = Some(h.clone());
                    }
                }
                Layer::Pool => h = h.max_pool2d(2)?,
            }
        }
        Ok(out.into_iter().map(|t| t.expect("all taps reached")).collect())
    }
}

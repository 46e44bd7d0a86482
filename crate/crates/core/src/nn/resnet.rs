//! ResNet-18 trunk (torchvision names) producing 512-d pooled embeddings;
//! one instance per retrieval domain (natural photos, sketches).

use candle_core::{DType, Device, Tensor};

use super::frozen::{conv_padded, imagenet_normalize, BatchNorm, FrozenWeights, WeightKind};
use crate::error::Result;

pub const EMBED_DIM: usize = 512;

#[derive(Debug, Clone)]
struct ConvBn {
    weight: Tensor,
    bn: BatchNorm,
    stride: usize,
    pad: usize,
}

impl ConvBn {
    fn load(
        w: &mut FrozenWeights,
        conv: &str,
        bn: &str,
        cin: usize,
        cout: usize,
        k: usize,
        stride: usize,
    ) -> Result<Self> {
        let weight = w.get(&format!("{conv}.weight"), &[cout, cin, k, k], WeightKind::Conv)?;
        let bn = BatchNorm::load(w, bn, cout, 1e-5)?;
        Ok(Self { weight, bn, stride, pad: k / 2 })
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.bn.forward(&conv_padded(x, &self.weight, self.stride, (self.pad, self.pad))?)
    }
}

#[derive(Debug, Clone)]
struct BasicBlock {
    conv1: ConvBn,
    conv2: ConvBn,
    downsample: Option<ConvBn>,
}

impl BasicBlock {
    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let h = self.conv1.forward(x)?.relu()?;
        let h = self.conv2.forward(&h)?;
        let skip = match &self.downsample {
            Some(d) => d.forward(x)?,
            None => x.clone(),
        };
        Ok((h + skip)?.relu()?)
    }
}

#[derive(Debug, Clone)]
pub struct ResNet18 {
    stem: ConvBn,
    blocks: Vec<BasicBlock>,
    id: String,
}

impl ResNet18 {
    pub fn build(w: &mut FrozenWeights) -> Result<Self> {
        let stem = ConvBn::load(w, "conv1", "bn1", 3, 64, 7, 2)?;
        let mut blocks = Vec::new();
        let mut cin = 64;
        for (layer, &cout) in [64usize, 128, 256, 512].iter().enumerate() {
            for b in 0..2 {
                let p = format!("layer{}.{b}", layer + 1);
                let stride = if b == 0 && layer > 0 { 2 } else { 1 };
                let downsample = if stride != 1 || cin != cout {
                    Some(ConvBn::load(
                        w,
                        &format!("{p}.downsample.0"),
                        &format!("{p}.downsample.1"),
                        cin,
                        cout,
                        1,
                        stride,
                    )?)
                } else {
                    None
                };
                blocks.push(BasicBlock {
                    conv1: ConvBn::load(w, &format!("{p}.conv1"), &format!("{p}.bn1"), cin, cout, 3, stride)?,
                    conv2: ConvBn::load(w, &format!("{p}.conv2"), &format!("{p}.bn2"), cout, cout, 3, 1)?,
                    downsample,
                });
                cin = cout;
            }
        }
        Ok(Self { stem, blocks, id: format!("resnet18:{}", w.id()) })
    }

    pub fn load(path: impl AsRef<std::path::Path>, device: &Device) -> Result<Self> {
        Self::build(&mut FrozenWeights::load(path, device, DType::F32)?)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// `(N, 512)` embeddings for a `[0,1]` RGB batch.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let h = self.stem.forward(&imagenet_normalize(x)?)?.relu()?;
        // inputs are post-ReLU, so zero padding acts like -inf padding for max
        let mut h = h.pad_with_zeros(2, 1, 1)?.pad_with_zeros(3, 1, 1)?.max_pool2d_with_stride(3, 2)?;
        for b in &self.blocks {
            h = b.forward(&h)?;
        }
        Ok(h.mean((2, 3))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_resnet_embeds_to_512() {
        let mut w = FrozenWeights::random(1, &Device::Cpu, DType::F32);
        let net = ResNet18::build(&mut w).unwrap();
        let x = Tensor::ones((1, 3, 64, 64), DType::F32, &Device::Cpu).unwrap();
        assert_eq!(net.forward(&x).unwrap().dims(), &[1, EMBED_DIM]);
    }
}

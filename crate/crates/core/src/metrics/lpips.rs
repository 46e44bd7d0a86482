use std::path::Path;

use candle_core::{DType, Device, Tensor};

use crate::error::{Error, Result};
use crate::nn::frozen::{FrozenWeights, WeightKind};
use crate::nn::scalar;
use crate::nn::vgg::{VggArch, VggFeatures, LPIPS_LAYERS, VGG_WIDTHS};
use crate::sketchdata::ColorPhoto;

/// Distance between two images; 0 for identical inputs.
pub trait PerceptualMetric: Send + Sync {
    fn id(&self) -> String;
    fn distance(&self, a: &ColorPhoto, b: &ColorPhoto) -> Result<f64>;
}

/// Mean absolute pixel difference.
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanAbsDiff;

impl PerceptualMetric for MeanAbsDiff {
    fn id(&self) -> String {
        "mean-abs-diff".into()
    }

    fn distance(&self, a: &ColorPhoto, b: &ColorPhoto) -> Result<f64> {
        if (a.width(), a.height()) != (b.width(), b.height()) {
            return Err(Error::Shape("images differ in size".into()));
        }
        let n = a.pixels().len() as f64;
        Ok(a.pixels().iter().zip(b.pixels()).map(|(x, y)| (x - y).abs() as f64).sum::<f64>() / n)
    }
}

/// LPIPS over VGG-16: unit-normalized activations at five taps, squared
/// differences weighted per channel by the learned linear heads, spatially
/// averaged and summed over taps. ImageNet normalization of `[0,1]` inputs
/// equals LPIPS's scaling layer on `[-1,1]` inputs.
pub struct Lpips {
    vgg: VggFeatures,
    heads: Vec<Tensor>,
    id: String,
}

impl Lpips {
    /// `vgg_path`: torchvision VGG-16 weights; `heads_path`: `lin{i}.model.1.weight` tensors.
    pub fn load(vgg_path: impl AsRef<Path>, heads_path: impl AsRef<Path>) -> Result<Self> {
        let dev = Device::Cpu;
        let mut w = FrozenWeights::load(vgg_path, &dev, DType::F32)?;
        let mut h = FrozenWeights::load(heads_path, &dev, DType::F32)?;
        Self::build(&mut w, &mut h, 1)
    }

    pub fn build(vgg: &mut FrozenWeights, heads: &mut FrozenWeights, width_divisor: usize) -> Result<Self> {
        let net = VggFeatures::build(vgg, VggArch::Vgg16, &LPIPS_LAYERS, width_divisor)?;
        let heads = VGG_WIDTHS
            .iter()
            .enumerate()
            .map(|(i, c)| heads.get(&format!("lin{i}.model.1.weight"), &[1, c / width_divisor, 1, 1], WeightKind::Ones))
            .collect::<Result<Vec<_>>>()?;
        let id = format!("lpips-vgg16:{}", net.id());
        Ok(Self { vgg: net, heads, id })
    }
}

fn unit_normalize(x: &Tensor) -> Result<Tensor> {
    let norm = (x.sqr()?.sum_keepdim(1)?.sqrt()? + 1e-10)?;
    Ok(x.broadcast_div(&norm)?)
}

impl PerceptualMetric for Lpips {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn distance(&self, a: &ColorPhoto, b: &ColorPhoto) -> Result<f64> {
        if (a.width(), a.height()) != (b.width(), b.height()) {
            return Err(Error::Shape("images differ in size".into()));
        }
        let fa = self.vgg.forward(&a.to_tensor(&Device::Cpu, DType::F32)?)?;
        let fb = self.vgg.forward(&b.to_tensor(&Device::Cpu, DType::F32)?)?;
        let mut total = 0.0;
        for ((x, y), w) in fa.iter().zip(&fb).zip(&self.heads) {
            let d = (unit_normalize(x)? - unit_normalize(y)?)?.sqr()?;
            total += scalar(&d.broadcast_mul(w)?.sum_keepdim(1)?.mean_all()?)?;
        }
        Ok(total)
    }
}

/// Mean distance over all unordered pairs of outputs.
pub fn lpips_diversity(outputs: &[ColorPhoto], metric: &dyn PerceptualMetric) -> Result<f64> {
    let n = outputs.len();
    if n < 2 {
        return Err(Error::InvalidInput(format!("diversity needs at least 2 outputs, got {n}")));
    }
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            sum += metric.distance(&outputs[i], &outputs[j])?;
        }
    }
    Ok(sum / (n * (n - 1) / 2) as f64)
}

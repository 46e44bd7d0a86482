use std::path::Path;

use candle_core::{DType, Device, Tensor};

use crate::error::{Error, Result};
use crate::nn::inception::{InceptionV3, INPUT_SIZE};
use crate::nn::resnet::ResNet18;
use crate::sketchdata::ColorPhoto;

/// Maps images to fixed-length vectors. Results are in input order.
pub trait FeatureExtractor: Send + Sync {
    fn id(&self) -> String;
    fn extract(&self, images: &[ColorPhoto]) -> Result<Vec<Vec<f64>>>;
}

/// Deterministic stand-in: the image box-resized to `size`², flattened.
#[derive(Debug, Clone, Copy)]
pub struct PixelExtractor {
    pub size: usize,
}

impl FeatureExtractor for PixelExtractor {
    fn id(&self) -> String {
        format!("pixels:{}", self.size)
    }

    fn extract(&self, images: &[ColorPhoto]) -> Result<Vec<Vec<f64>>> {
        if self.size == 0 {
            return Err(Error::Config("pixel extractor size must be positive".into()));
        }
        images
            .iter()
            .map(|img| {
                let t = img.to_tensor(&Device::Cpu, DType::F64)?;
                let (h, w) = (img.height(), img.width());
                if h % self.size != 0 || w % self.size != 0 {
                    return Err(Error::Shape(format!("{w}×{h} is not a multiple of {}", self.size)));
                }
                let pooled = t.avg_pool2d((h / self.size, w / self.size))?;
                Ok(pooled.flatten_all()?.to_vec1::<f64>()?)
            })
            .collect()
    }
}

fn batched(images: &[ColorPhoto], size: usize, f: impl Fn(&Tensor) -> Result<Tensor>) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(images.len());
    for chunk in images.chunks(8) {
        let parts = chunk
            .iter()
            .map(|p| p.resized(size).to_tensor(&Device::Cpu, DType::F32))
            .collect::<Result<Vec<_>>>()?;
        let y = f(&Tensor::cat(&parts, 0)?)?.to_dtype(DType::F64)?;
        out.extend(y.to_vec2::<f64>()?);
    }
    Ok(out)
}

/// Inception-v3 pool3 activations (2048-d) for FID.
pub struct InceptionExtractor(pub InceptionV3);

impl InceptionExtractor {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(Self(InceptionV3::load(path, &Device::Cpu)?))
    }
}

impl FeatureExtractor for InceptionExtractor {
    fn id(&self) -> String {
        self.0.id().to_string()
    }

    fn extract(&self, images: &[ColorPhoto]) -> Result<Vec<Vec<f64>>> {
        batched(images, INPUT_SIZE, |x| self.0.forward(x))
    }
}

/// ResNet-18 512-d embeddings for retrieval.
pub struct ResNetExtractor(pub ResNet18);

impl ResNetExtractor {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(Self(ResNet18::load(path, &Device::Cpu)?))
    }
}

impl FeatureExtractor for ResNetExtractor {
    fn id(&self) -> String {
        self.0.id().to_string()
    }

    fn extract(&self, images: &[ColorPhoto]) -> Result<Vec<Vec<f64>>> {
        batched(images, 224, |x| self.0.forward(x))
    }
}

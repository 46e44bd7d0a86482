use std::path::Path;

use candle_core::{DType, Device};
use sha2::{Digest, Sha256};

use super::checkpoint::{Checkpoint, Stage};
use crate::content::{ContentNetConfig, ContentNetworks};
use crate::error::{Error, Result};
use crate::shape::{ShapeNetConfig, ShapeNetworks};
use crate::sketchdata::{to_grayscale, ColorPhoto, GrayscalePhoto, SketchImage};

pub fn shape_from_checkpoint(ck: &Checkpoint, device: &Device) -> Result<ShapeNetworks> {
    ck.expect_stage(Stage::Shape)?;
    let cfg: ShapeNetConfig = serde_json::from_value(ck.net_config.clone())?;
    let dtype = ck.params.values().next().map(|b| b.dtype).unwrap_or(DType::F32);
    let nets = ShapeNetworks::new(cfg, 0, device, dtype)?;
    ck.apply(&nets.params)?;
    Ok(nets)
}

pub fn content_from_checkpoint(ck: &Checkpoint, device: &Device) -> Result<ContentNetworks> {
    ck.expect_stage(Stage::Content)?;
    let cfg: ContentNetConfig = serde_json::from_value(ck.net_config.clone())?;
    let dtype = ck.params.values().next().map(|b| b.dtype).unwrap_or(DType::F32);
    let nets = ContentNetworks::new(cfg, 0, device, dtype)?;
    ck.apply(&nets.params)?;
    Ok(nets)
}

/// Loaded inference networks. Either stage may be absent; operations that
/// need a missing stage fail with a configuration error.
pub struct Synthesizer {
    shape: Option<ShapeNetworks>,
    content: Option<ContentNetworks>,
    version: String,
}

impl Synthesizer {
    pub fn new(shape: Option<ShapeNetworks>, content: Option<ContentNetworks>, version: impl Into<String>) -> Self {
        Self { shape, content, version: version.into() }
    }

    /// Model version: a digest of the checkpoint files that were loaded.
    pub fn load(shape: Option<&Path>, content: Option<&Path>) -> Result<Self> {
        let dev = Device::Cpu;
        let mut hasher = Sha256::new();
        let mut read = |p: &Path| -> Result<Checkpoint> {
            let bytes = std::fs::read(p).map_err(|e| Error::Config(format!("checkpoint {}: {e}", p.display())))?;
            hasher.update(&bytes);
            Checkpoint::from_bytes(&bytes)
        };
        let shape = shape.map(|p| read(p).and_then(|c| shape_from_checkpoint(&c, &dev))).transpose()?;
        let content = content.map(|p| read(p).and_then(|c| content_from_checkpoint(&c, &dev))).transpose()?;
        let digest = hasher.finalize();
        let version = digest.iter().take(6).map(|b| format!("{b:02x}")).collect::<String>();
        Ok(Self { shape, content, version })
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn has_shape(&self) -> bool {
        self.shape.is_some()
    }

    pub fn has_content(&self) -> bool {
        self.content.is_some()
    }

    pub fn shape(&self) -> Result<&ShapeNetworks> {
        self.shape.as_ref().ok_or_else(|| Error::Config("no shape checkpoint loaded".into()))
    }

    pub fn content(&self) -> Result<&ContentNetworks> {
        self.content.as_ref().ok_or_else(|| Error::Config("no content checkpoint loaded".into()))
    }

    /// `T(sketch)`, then enrichment with or without a reference.
    pub fn synthesize(&self, sketch: &SketchImage, reference: Option<&ColorPhoto>) -> Result<(GrayscalePhoto, ColorPhoto)> {
        let shape = self.shape()?;
        let content = self.content()?;
        let gray = shape.sketch_to_gray(sketch)?;
        let color = content.enrich(&gray, reference)?;
        Ok((gray, color))
    }

    /// `T′(grayscale(photo))`.
    pub fn photo_to_sketch(&self, photo: &ColorPhoto) -> Result<SketchImage> {
        self.shape()?.gray_to_sketch(&to_grayscale(photo))
    }
}

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::content::{ContentHyper, ContentNetConfig};
use crate::error::{Error, Result};
use crate::shape::{ShapeHyper, ShapeNetConfig};
use crate::sketchdata::{DEFAULT_CROP_SIZE, DEFAULT_DENSITY_THRESHOLD, DEFAULT_PATCH_SIZE, DEFAULT_POOL_SIZE};

/// Fallback config path when no `--config` flag is given.
pub const CONFIG_ENV: &str = "SKETCH2PHOTO_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Directory holding `sketch/` and `photo/`.
    pub root: Option<PathBuf>,
    pub image_size: usize,
    pub seed: u64,
    pub noise_crop_size: usize,
    pub noise_density_threshold: f64,
    pub noise_pool_size: usize,
    /// Prebuilt pool from `prepare-data`; built on the fly when absent.
    pub noise_pool: Option<PathBuf>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            root: None,
            image_size: 128,
            seed: 0,
            noise_crop_size: DEFAULT_CROP_SIZE,
            noise_density_threshold: DEFAULT_DENSITY_THRESHOLD,
            noise_pool_size: DEFAULT_POOL_SIZE,
            noise_pool: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapeConfig {
    pub epochs: usize,
    pub lr_constant_epochs: usize,
    pub base_lr: f64,
    pub batch_size: usize,
    pub p_complex: f64,
    pub p_distractive: f64,
    pub patch_size: usize,
    pub lambda_adv: f64,
    pub lambda_cycle: f64,
    pub lambda_identity: f64,
    pub lambda_self_supervised: f64,
    pub base_channels: usize,
    pub residual_blocks: usize,
    pub disc_channels: usize,
    pub attention: bool,
    pub buffer_size: usize,
    pub seed: u64,
    /// Caps the steps in one epoch (one epoch otherwise visits every sketch).
    pub max_steps_per_epoch: Option<usize>,
}

impl Default for ShapeConfig {
    fn default() -> Self {
        let h = ShapeHyper::default();
        let n = ShapeNetConfig::default();
        Self {
            epochs: 500,
            lr_constant_epochs: 100,
            base_lr: h.lr,
            batch_size: 1,
            p_complex: 0.2,
            p_distractive: 0.3,
            patch_size: DEFAULT_PATCH_SIZE,
            lambda_adv: h.lambda_adv,
            lambda_cycle: h.lambda_cycle,
            lambda_identity: h.lambda_identity,
            lambda_self_supervised: h.lambda_self_supervised,
            base_channels: n.base_channels,
            residual_blocks: n.residual_blocks,
            disc_channels: n.disc_channels,
            attention: n.attention,
            buffer_size: h.buffer_size,
            seed: 1,
            max_steps_per_epoch: None,
        }
    }
}

impl ShapeConfig {
    pub fn net(&self) -> ShapeNetConfig {
        ShapeNetConfig {
            base_channels: self.base_channels,
            residual_blocks: self.residual_blocks,
            disc_channels: self.disc_channels,
            attention: self.attention,
        }
    }

    pub fn hyper(&self) -> ShapeHyper {
        ShapeHyper {
            lambda_adv: self.lambda_adv,
            lambda_cycle: self.lambda_cycle,
            lambda_identity: self.lambda_identity,
            lambda_self_supervised: self.lambda_self_supervised,
            lr: self.base_lr,
            buffer_size: self.buffer_size,
            ..ShapeHyper::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContentConfig {
    pub epochs: usize,
    pub lr_constant_epochs: usize,
    pub base_lr: f64,
    pub p_reference: f64,
    pub lambda_adv: f64,
    pub lambda_intensity: f64,
    pub lambda_style: f64,
    pub lambda_content: f64,
    pub base_channels: usize,
    pub residual_blocks: usize,
    pub disc_channels: usize,
    /// VGG-19 safetensors for the style loss; without it only the
    /// no-reference path trains.
    pub style_extractor_path: Option<PathBuf>,
    pub seed: u64,
    pub max_steps_per_epoch: Option<usize>,
}

impl Default for ContentConfig {
    fn default() -> Self {
        let h = ContentHyper::default();
        let n = ContentNetConfig::default();
        Self {
            epochs: 200,
            lr_constant_epochs: 100,
            base_lr: h.lr,
            p_reference: h.p_reference,
            lambda_adv: h.lambda_adv,
            lambda_intensity: h.lambda_intensity,
            lambda_style: h.lambda_style,
            lambda_content: h.lambda_content,
            base_channels: n.base_channels,
            residual_blocks: n.residual_blocks,
            disc_channels: n.disc_channels,
            style_extractor_path: None,
            seed: 2,
            max_steps_per_epoch: None,
        }
    }
}

impl ContentConfig {
    pub fn net(&self) -> ContentNetConfig {
        ContentNetConfig {
            base_channels: self.base_channels,
            residual_blocks: self.residual_blocks,
            disc_channels: self.disc_channels,
        }
    }

    pub fn hyper(&self) -> ContentHyper {
        ContentHyper {
            lambda_adv: self.lambda_adv,
            lambda_intensity: self.lambda_intensity,
            lambda_style: self.lambda_style,
            lambda_content: self.lambda_content,
            lr: self.base_lr,
            p_reference: self.p_reference,
            ..ContentHyper::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub inception_path: Option<PathBuf>,
    pub resnet_photo_path: Option<PathBuf>,
    pub resnet_sketch_path: Option<PathBuf>,
    pub lpips_vgg_path: Option<PathBuf>,
    pub lpips_heads_path: Option<PathBuf>,
    /// Side of the pixel stand-in extractor used when no weights are configured.
    pub stub_extractor_size: usize,
    pub references_per_input: usize,
    pub top_k: Vec<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            inception_path: None,
            resnet_photo_path: None,
            resnet_sketch_path: None,
            lpips_vgg_path: None,
            lpips_heads_path: None,
            stub_extractor_size: 8,
            references_per_input: 10,
            top_k: vec![1, 5, 10, 20],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeConfig {
    pub addr: String,
    pub shape_checkpoint: Option<PathBuf>,
    pub content_checkpoint: Option<PathBuf>,
    pub gallery_dir: Option<PathBuf>,
    pub thumbnail_size: usize,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self {
            addr: "127.0.0.1:8080".into(),
            shape_checkpoint: None,
            content_checkpoint: None,
            gallery_dir: None,
            thumbnail_size: 64,
        }
    }
}

/// Every hyperparameter, with the published recipe as defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub data: DataConfig,
    pub shape: ShapeConfig,
    pub content: ContentConfig,
    pub eval: EvalConfig,
    pub serve: ServeConfig,
}

impl TrainingConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("reading {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// `explicit`, else the path in [`CONFIG_ENV`], else defaults.
    pub fn resolve(explicit: Option<&Path>) -> Result<Self> {
        if let Some(p) = explicit {
            return Self::load(p);
        }
        match std::env::var_os(CONFIG_ENV) {
            Some(p) if !p.is_empty() => Self::load(PathBuf::from(p)),
            _ => Ok(Self::default()),
        }
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        let s = &self.shape;
        let c = &self.content;
        if !prob(s.p_complex) || !prob(s.p_distractive) || s.p_complex + s.p_distractive > 1.0 {
            return bad(format!("p_complex {} + p_distractive {} must be probabilities summing to ≤ 1", s.p_complex, s.p_distractive));
        }
        if !prob(c.p_reference) {
            return bad(format!("p_reference {} is not a probability", c.p_reference));
        }
        let lambdas = [
            s.lambda_adv,
            s.lambda_cycle,
            s.lambda_identity,
            s.lambda_self_supervised,
            c.lambda_adv,
            c.lambda_intensity,
            c.lambda_style,
            c.lambda_content,
        ];
        if lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return bad("loss weights must be finite and non-negative".into());
        }
        let n = self.data.image_size;
        if n < 8 || n % 4 != 0 {
            return bad(format!("image_size {n} must be a multiple of 4 and at least 8"));
        }
        if s.batch_size == 0 || s.base_channels == 0 || c.base_channels == 0 || s.disc_channels == 0 || c.disc_channels == 0 {
            return bad("batch size and channel widths must be positive".into());
        }
        if !(s.base_lr >= 0.0 && c.base_lr >= 0.0) {
            return bad("learning rates must be non-negative".into());
        }
        if s.patch_size > n {
            return bad(format!("patch_size {} exceeds image_size {n}", s.patch_size));
        }
        Ok(())
    }
}

use candle_core::Tensor;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{instance_norm, leaky_relu, Conv2d, Padding, ResidualBlock, Scope, UpConv};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub in_channels: usize,
    pub out_channels: usize,
    /// Width after the stem; the bottleneck has four times this.
    pub base_channels: usize,
    pub residual_blocks: usize,
    /// Build the suppression-attention head on the bottleneck.
    pub attention: bool,
}

impl GeneratorConfig {
    pub const fn sketch_to_gray(base_channels: usize, residual_blocks: usize) -> Self {
        Self { in_channels: 1, out_channels: 1, base_channels, residual_blocks, attention: true }
    }

    pub const fn gray_to_sketch(base_channels: usize, residual_blocks: usize) -> Self {
        Self { in_channels: 1, out_channels: 1, base_channels, residual_blocks, attention: false }
    }
}

/// Per-location suppression weights in `[0,1]`, shaped `(N, 1, H', W')`.
#[derive(Debug, Clone)]
pub struct AttentionMap(Tensor);

impl AttentionMap {
    pub fn new(values: Tensor) -> Result<Self> {
        let dims = values.dims();
        if dims.len() != 4 || dims[1] != 1 {
            return Err(Error::Shape(format!("attention map must be (N,1,H,W), got {dims:?}")));
        }
        let (lo, hi) = (
            crate::nn::scalar(&values.min_all()?)?,
            crate::nn::scalar(&values.max_all()?)?,
        );
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) {
            return Err(Error::InvalidInput(format!("attention values span [{lo}, {hi}]")));
        }
        Ok(Self(values))
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn values(&self) -> Result<Vec<f32>> {
        Ok(self.0.to_dtype(candle_core::DType::F32)?.flatten_all()?.to_vec1()?)
    }
}

/// Two-layer convolutional head: `conv3x3 → ReLU → conv1x1 (2 ch) → softmax`
/// over the channel pair; channel 0 is the map. The second layer starts at
/// zero so the initial map is uniformly 0.5.
#[derive(Debug, Clone)]
pub struct AttentionModule {
    hidden: Conv2d,
    head: Conv2d,
}

impl AttentionModule {
    pub fn new(scope: &mut Scope<'_>, channels: usize, hidden: usize) -> Result<Self> {
        Ok(Self {
            hidden: Conv2d::new(&mut scope.sub("conv1"), channels, hidden, 3, 1, Padding::Zeros(1))?,
            head: Conv2d::zeroed(&mut scope.sub("conv2"), hidden, 2, 1, Padding::Zeros(0))?,
        })
    }

    pub fn logits(&self, feature: &Tensor) -> Result<Tensor> {
        self.head.forward(&self.hidden.forward(feature)?.relu()?)
    }

    pub fn mask(&self, feature: &Tensor) -> Result<AttentionMap> {
        let probs = candle_nn::ops::softmax(&self.logits(feature)?, 1)?;
        Ok(AttentionMap(probs.narrow(1, 0, 1)?))
    }
}

/// Softmax over a two-channel logit map; channel 0 becomes the attention map.
pub fn attention_from_logits(logits: &Tensor) -> Result<AttentionMap> {
    if logits.dims().len() != 4 || logits.dim(1)? != 2 {
        return Err(Error::Shape(format!("attention logits must be (N,2,H,W), got {:?}", logits.dims())));
    }
    Ok(AttentionMap(candle_nn::ops::softmax(logits, 1)?.narrow(1, 0, 1)?))
}

/// `(1 − A) ⊙ f`, with `A` broadcast across channels.
pub fn apply_attention(feature: &Tensor, attention: &AttentionMap) -> Result<Tensor> {
    let (fd, ad) = (feature.dims(), attention.0.dims());
    if fd.len() != 4 || fd[0] != ad[0] || fd[2..] != ad[2..] {
        return Err(Error::Shape(format!("feature {fd:?} vs attention {ad:?}")));
    }
    let keep = attention.0.affine(-1.0, 1.0)?;
    Ok(feature.broadcast_mul(&keep)?)
}

/// Encoder–decoder generator: 7×7 stem, two stride-2 down-samplings,
/// residual blocks, two stride-2 up-samplings and a 7×7 tanh head. Every
/// convolution except the head is followed by instance norm and ReLU.
#[derive(Debug, Clone)]
pub struct Generator {
    config: GeneratorConfig,
    stem: Conv2d,
    down: [Conv2d; 2],
    attention: Option<AttentionModule>,
    blocks: Vec<ResidualBlock>,
    up: [UpConv; 2],
    head: Conv2d,
}

pub struct GeneratorOutput {
    pub image: Tensor,
    pub attention: Option<AttentionMap>,
}

impl Generator {
    pub fn new(scope: &mut Scope<'_>, config: GeneratorConfig) -> Result<Self> {
        let b = config.base_channels;
        if b == 0 {
            return Err(Error::Config("generator base_channels must be positive".into()));
        }
        let stem = Conv2d::new(&mut scope.sub("stem"), config.in_channels, b, 7, 1, Padding::Reflect(3))?;
        let down = [
            Conv2d::new(&mut scope.sub("down1"), b, 2 * b, 3, 2, Padding::Zeros(1))?,
            Conv2d::new(&mut scope.sub("down2"), 2 * b, 4 * b, 3, 2, Padding::Zeros(1))?,
        ];
        let attention = if config.attention {
            Some(AttentionModule::new(&mut scope.sub("attention"), 4 * b, b)?)
        } else {
            None
        };
        let blocks = (0..config.residual_blocks)
            .map(|i| ResidualBlock::new(&mut scope.sub(&format!("res{i}")), 4 * b, true))
            .collect::<Result<_>>()?;
        let up = [
            UpConv::new(&mut scope.sub("up1"), 4 * b, 2 * b)?,
            UpConv::new(&mut scope.sub("up2"), 2 * b, b)?,
        ];
        let head = Conv2d::new(&mut scope.sub("head"), b, config.out_channels, 7, 1, Padding::Reflect(3))?;
        Ok(Self { config, stem, down, attention, blocks, up, head })
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.config
    }

    pub fn has_attention(&self) -> bool {
        self.attention.is_some()
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        let d = x.dims();
        if d.len() != 4 || d[1] != self.config.in_channels {
            return Err(Error::Shape(format!(
                "generator expects (N,{},H,W), got {d:?}",
                self.config.in_channels
            )));
        }
        if d[2] % 4 != 0 || d[3] % 4 != 0 || d[2] < 8 || d[3] < 8 {
            return Err(Error::Shape(format!(
                "generator spatial size {}x{} must be divisible by 4 and at least 8",
                d[2], d[3]
            )));
        }
        Ok(())
    }

    /// Down-sampled features before attention and residual blocks.
    pub fn bottleneck(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        let mut h = instance_norm(&self.stem.forward(x)?)?.relu()?;
        for d in &self.down {
            h = instance_norm(&d.forward(&h)?)?.relu()?;
        }
        Ok(h)
    }

    pub fn attention_mask(&self, feature: &Tensor) -> Result<Option<AttentionMap>> {
        self.attention.as_ref().map(|a| a.mask(feature)).transpose()
    }

    pub fn forward_detailed(&self, x: &Tensor, attention_enabled: bool) -> Result<GeneratorOutput> {
        let mut h = self.bottleneck(x)?;
        let mut attention = None;
        if attention_enabled {
            if let Some(module) = &self.attention {
                let a = module.mask(&h)?;
                h = apply_attention(&h, &a)?;
                attention = Some(a);
            }
        }
        for b in &self.blocks {
            h = b.forward(&h)?;
        }
        for u in &self.up {
            h = instance_norm(&u.forward(&h)?)?.relu()?;
        }
        Ok(GeneratorOutput { image: self.head.forward(&h)?.tanh()?, attention })
    }

    /// Image in the `[-1,1]` convention to image in `[-1,1]`.
    pub fn forward(&self, x: &Tensor, attention_enabled: bool) -> Result<Tensor> {
        Ok(self.forward_detailed(x, attention_enabled)?.image)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscriminatorConfig {
    pub in_channels: usize,
    pub base_channels: usize,
}

/// Patch discriminator: four 4×4 convolutions with strides 2, 2, 2, 1
/// (instance norm after layers 2–4, LeakyReLU 0.2 after each) and a final
/// 1-channel 4×4 convolution. No output activation.
#[derive(Debug, Clone)]
pub struct Discriminator {
    layers: [Conv2d; 4],
    head: Conv2d,
}

impl Discriminator {
    pub fn new(scope: &mut Scope<'_>, config: DiscriminatorConfig) -> Result<Self> {
        let b = config.base_channels;
        if b == 0 {
            return Err(Error::Config("discriminator base_channels must be positive".into()));
        }
        let p = Padding::Zeros(1);
        Ok(Self {
            layers: [
                Conv2d::new(&mut scope.sub("conv1"), config.in_channels, b, 4, 2, p)?,
                Conv2d::new(&mut scope.sub("conv2"), b, 2 * b, 4, 2, p)?,
                Conv2d::new(&mut scope.sub("conv3"), 2 * b, 4 * b, 4, 2, p)?,
                Conv2d::new(&mut scope.sub("conv4"), 4 * b, 8 * b, 4, 1, p)?,
            ],
            head: Conv2d::new(&mut scope.sub("head"), 8 * b, 1, 4, 1, p)?,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut h = x.clone();
        for (i, l) in self.layers.iter().enumerate() {
            h = l.forward(&h)?;
            if i > 0 {
                h = instance_norm(&h)?;
            }
            h = leaky_relu(&h, 0.2)?;
        }
        self.head.forward(&h)
    }

    /// Side of the score map for a square input of side `n`.
    pub fn score_size(n: usize) -> usize {
        let conv = |n: usize, s: usize| (n + 2 - 4) / s + 1;
        conv(conv(conv(conv(conv(n, 2), 2), 2), 1), 1)
    }
}

/// Run a generator on a `[-1,1]` image.
pub fn generator_forward(g: &Generator, image: &Tensor, attention_enabled: bool) -> Result<Tensor> {
    g.forward(image, attention_enabled)
}

pub fn attention_mask(module: &AttentionModule, feature: &Tensor) -> Result<AttentionMap> {
    module.mask(feature)
}

pub fn discriminator_forward(d: &Discriminator, image: &Tensor) -> Result<Tensor> {
    d.forward(image)
}

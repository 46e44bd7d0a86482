use candle_core::Tensor;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{reflect_pad, to_signed, Conv2d, Padding, ResidualBlock, Scope, UpConv};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContentNetConfig {
    /// Width of the first encoder block; later blocks use 2× and 4×.
    pub base_channels: usize,
    pub residual_blocks: usize,
    pub disc_channels: usize,
}

impl Default for ContentNetConfig {
    fn default() -> Self {
        Self { base_channels: 64, residual_blocks: 12, disc_channels: 64 }
    }
}

/// Trainable VGG-19-shaped trunk: a 1×1 colour conv, then blocks of 2, 2 and
/// 4 3×3 convs separated by two max-pools. 128² in → 32² out.
#[derive(Debug, Clone)]
pub struct Encoder {
    convs: Vec<Conv2d>,
    /// Indices after which a 2×2 max-pool follows.
    pools: [usize; 2],
}

impl Encoder {
    pub fn new(scope: &mut Scope<'_>, base: usize) -> Result<Self> {
        let mut convs = vec![Conv2d::new(&mut scope.sub("conv0"), 3, 3, 1, 1, Padding::Zeros(0))?];
        let mut cin = 3;
        for (block, (n, width)) in [(2, base), (2, 2 * base), (4, 4 * base)].into_iter().enumerate() {
            for i in 0..n {
                let name = format!("conv{}_{}", block + 1, i + 1);
                convs.push(Conv2d::new(&mut scope.sub(&name), cin, width, 3, 1, Padding::Reflect(1))?);
                cin = width;
            }
        }
        Ok(Self { convs, pools: [2, 4] })
    }

    pub fn out_channels(&self) -> usize {
        self.convs.last().map(Conv2d::out_channels).unwrap_or(0)
    }

    /// `[0,1]` images, 1 channel (replicated) or 3 channels.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let x = match x.dims4()?.1 {
            1 => x.repeat((1, 3, 1, 1))?,
            3 => x.clone(),
            c => return Err(Error::Shape(format!("encoder takes 1 or 3 channels, got {c}"))),
        };
        let mut h = to_signed(&x)?;
        for (i, conv) in self.convs.iter().enumerate() {
            h = conv.forward(&h)?;
            if i > 0 {
                h = h.relu()?;
            }
            if self.pools.contains(&i) {
                h = h.max_pool2d(2)?;
            }
        }
        Ok(h)
    }
}

/// Residual trunk without normalization (it would erase the AdaIN
/// statistics), two ×2 upsamplings and a 7×7 RGB head mapped to `[0,1]`.
#[derive(Debug, Clone)]
pub struct Decoder {
    blocks: Vec<ResidualBlock>,
    up: [UpConv; 2],
    head: Conv2d,
    channels: usize,
}

impl Decoder {
    pub fn new(scope: &mut Scope<'_>, base: usize, residual_blocks: usize) -> Result<Self> {
        let channels = 4 * base;
        let blocks = (0..residual_blocks)
            .map(|i| ResidualBlock::new(&mut scope.sub(&format!("res{i}")), channels, false))
            .collect::<Result<_>>()?;
        let up = [
            UpConv::new(&mut scope.sub("up0"), channels, 2 * base)?,
            UpConv::new(&mut scope.sub("up1"), 2 * base, base)?,
        ];
        let head = Conv2d::new(&mut scope.sub("head"), base, 3, 7, 1, Padding::Zeros(0))?;
        Ok(Self { blocks, up, head, channels })
    }

    pub fn forward(&self, t: &Tensor) -> Result<Tensor> {
        let c = t.dims4()?.1;
        if c != self.channels {
            return Err(Error::Shape(format!("decoder expects {} channels, got {c}", self.channels)));
        }
        let mut h = t.clone();
        for b in &self.blocks {
            h = b.forward(&h)?;
        }
        for up in &self.up {
            h = up.forward(&h)?.relu()?;
        }
        let y = self.head.forward(&reflect_pad(&h, 3)?)?;
        Ok(y.tanh()?.affine(0.5, 0.5)?)
    }
}

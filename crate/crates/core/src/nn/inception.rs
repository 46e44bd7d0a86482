//! Inception-v3 trunk up to the 2048-d global-average "pool3" activations,
//! using torchvision parameter names. Inputs are `[0,1]` RGB at 299×299,
//! rescaled to `[-1,1]` as the FID reference network expects.

use candle_core::{DType, Device, Tensor};

use super::frozen::{conv_padded, BatchNorm, FrozenWeights, WeightKind};
use crate::error::Result;

pub const POOL3_DIM: usize = 2048;
pub const INPUT_SIZE: usize = 299;

#[derive(Debug, Clone)]
struct BasicConv {
    weight: Tensor,
    bn: BatchNorm,
    stride: usize,
    pad: (usize, usize),
}

impl BasicConv {
    #[allow(clippy::too_many_arguments)]
    fn load(
        w: &mut FrozenWeights,
        name: &str,
        cin: usize,
        cout: usize,
        k: (usize, usize),
        stride: usize,
        pad: (usize, usize),
    ) -> Result<Self> {
        let weight = w.get(&format!("{name}.conv.weight"), &[cout, cin, k.0, k.1], WeightKind::Conv)?;
        let bn = BatchNorm::load(w, &format!("{name}.bn"), cout, 1e-3)?;
        Ok(Self { weight, bn, stride, pad })
    }

    fn sq(w: &mut FrozenWeights, name: &str, cin: usize, cout: usize, k: usize, stride: usize, pad: usize) -> Result<Self> {
        Self::load(w, name, cin, cout, (k, k), stride, (pad, pad))
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let y = conv_padded(x, &self.weight, self.stride, self.pad)?;
        Ok(self.bn.forward(&y)?.relu()?)
    }
}

fn avg_pool_3x3_same(x: &Tensor) -> Result<Tensor> {
    let p = x.pad_with_zeros(2, 1, 1)?.pad_with_zeros(3, 1, 1)?;
    Ok(p.avg_pool2d_with_stride(3, 1)?)
}

fn max_pool_3x3_s2(x: &Tensor) -> Result<Tensor> {
    Ok(x.max_pool2d_with_stride(3, 2)?)
}

#[derive(Debug, Clone)]
struct InceptionA {
    b1: BasicConv,
    b5_1: BasicConv,
    b5_2: BasicConv,
    b3_1: BasicConv,
    b3_2: BasicConv,
    b3_3: BasicConv,
    pool: BasicConv,
}

impl InceptionA {
    fn load(w: &mut FrozenWeights, n: &str, cin: usize, pool_features: usize) -> Result<Self> {
        Ok(Self {
            b1: BasicConv::sq(w, &format!("{n}.branch1x1"), cin, 64, 1, 1, 0)?,
            b5_1: BasicConv::sq(w, &format!("{n}.branch5x5_1"), cin, 48, 1, 1, 0)?,
            b5_2: BasicConv::sq(w, &format!("{n}.branch5x5_2"), 48, 64, 5, 1, 2)?,
            b3_1: BasicConv::sq(w, &format!("{n}.branch3x3dbl_1"), cin, 64, 1, 1, 0)?,
            b3_2: BasicConv::sq(w, &format!("{n}.branch3x3dbl_2"), 64, 96, 3, 1, 1)?,
            b3_3: BasicConv::sq(w, &format!("{n}.branch3x3dbl_3"), 96, 96, 3, 1, 1)?,
            pool: BasicConv::sq(w, &format!("{n}.branch_pool"), cin, pool_features, 1, 1, 0)?,
        })
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let a = self.b1.forward(x)?;
        let b = self.b5_2.forward(&self.b5_1.forward(x)?)?;
        let c = self.b3_3.forward(&self.b3_2.forward(&self.b3_1.forward(x)?)?)?;
        let d = self.pool.forward(&avg_pool_3x3_same(x)?)?;
        Ok(Tensor::cat(&[a, b, c, d], 1)?)
    }
}

#[derive(Debug, Clone)]
struct InceptionB {
    b3: BasicConv,
    d1: BasicConv,
    d2: BasicConv,
    d3: BasicConv,
}

impl InceptionB {
    fn load(w: &mut FrozenWeights, n: &str, cin: usize) -> Result<Self> {
        Ok(Self {
            b3: BasicConv::sq(w, &format!("{n}.branch3x3"), cin, 384, 3, 2, 0)?,
            d1: BasicConv::sq(w, &format!("{n}.branch3x3dbl_1"), cin, 64, 1, 1, 0)?,
            d2: BasicConv::sq(w, &format!("{n}.branch3x3dbl_2"), 64, 96, 3, 1, 1)?,
            d3: BasicConv::sq(w, &format!("{n}.branch3x3dbl_3"), 96, 96, 3, 2, 0)?,
        })
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let a = self.b3.forward(x)?;
        let b = self.d3.forward(&self.d2.forward(&self.d1.forward(x)?)?)?;
        Ok(Tensor::cat(&[a, b, max_pool_3x3_s2(x)?], 1)?)
    }
}

#[derive(Debug, Clone)]
struct InceptionC {
    b1: BasicConv,
    b7: [BasicConv; 3],
    d7: [BasicConv; 5],
    pool: BasicConv,
}

impl InceptionC {
    fn load(w: &mut FrozenWeights, n: &str, cin: usize, c7: usize) -> Result<Self> {
        let row = (1, 7);
        let col = (7, 1);
        let (prow, pcol) = ((0, 3), (3, 0));
        Ok(Self {
            b1: BasicConv::sq(w, &format!("{n}.branch1x1"), cin, 192, 1, 1, 0)?,
            b7: [
                BasicConv::sq(w, &format!("{n}.branch7x7_1"), cin, c7, 1, 1, 0)?,
                BasicConv::load(w, &format!("{n}.branch7x7_2"), c7, c7, row, 1, prow)?,
                BasicConv::load(w, &format!("{n}.branch7x7_3"), c7, 192, col, 1, pcol)?,
            ],
            d7: [
                BasicConv::sq(w, &format!("{n}.branch7x7dbl_1"), cin, c7, 1, 1, 0)?,
                BasicConv::load(w, &format!("{n}.branch7x7dbl_2"), c7, c7, col, 1, pcol)?,
                BasicConv::load(w, &format!("{n}.branch7x7dbl_3"), c7, c7, row, 1, prow)?,
                BasicConv::load(w, &format!("{n}.branch7x7dbl_4"), c7, c7, col, 1, pcol)?,
                BasicConv::load(w, &format!("{n}.branch7x7dbl_5"), c7, 192, row, 1, prow)?,
            ],
            pool: BasicConv::sq(w, &format!("{n}.branch_pool"), cin, 192, 1, 1, 0)?,
        })
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let a = self.b1.forward(x)?;
        let mut b = x.clone();
        for c in &self.b7 {
            b = c.forward(&b)?;
        }
        let mut d = x.clone();
        for c in &self.d7 {
            d = c.forward(&d)?;
        }
        let p = self.pool.forward(&avg_pool_3x3_same(x)?)?;
        Ok(Tensor::cat(&[a, b, d, p], 1)?)
    }
}

#[derive(Debug, Clone)]
struct InceptionD {
    b3: [BasicConv; 2],
    b7: [BasicConv; 4],
}

impl InceptionD {
    fn load(w: &mut FrozenWeights, n: &str, cin: usize) -> Result<Self> {
        Ok(Self {
            b3: [
                BasicConv::sq(w, &format!("{n}.branch3x3_1"), cin, 192, 1, 1, 0)?,
                BasicConv::sq(w, &format!("{n}.branch3x3_2"), 192, 320, 3, 2, 0)?,
            ],
            b7: [
                BasicConv::sq(w, &format!("{n}.branch7x7x3_1"), cin, 192, 1, 1, 0)?,
                BasicConv::load(w, &format!("{n}.branch7x7x3_2"), 192, 192, (1, 7), 1, (0, 3))?,
                BasicConv::load(w, &format!("{n}.branch7x7x3_3"), 192, 192, (7, 1), 1, (3, 0))?,
                BasicConv::sq(w, &format!("{n}.branch7x7x3_4"), 192, 192, 3, 2, 0)?,
            ],
        })
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let a = self.b3[1].forward(&self.b3[0].forward(x)?)?;
        let mut b = x.clone();
        for c in &self.b7 {
            b = c.forward(&b)?;
        }
        Ok(Tensor::cat(&[a, b, max_pool_3x3_s2(x)?], 1)?)
    }
}

#[derive(Debug, Clone)]
struct InceptionE {
    b1: BasicConv,
    b3_1: BasicConv,
    b3_2a: BasicConv,
    b3_2b: BasicConv,
    d1: BasicConv,
    d2: BasicConv,
    d3a: BasicConv,
    d3b: BasicConv,
    pool: BasicConv,
}

impl InceptionE {
    fn load(w: &mut FrozenWeights, n: &str, cin: usize) -> Result<Self> {
        Ok(Self {
            b1: BasicConv::sq(w, &format!("{n}.branch1x1"), cin, 320, 1, 1, 0)?,
            b3_1: BasicConv::sq(w, &format!("{n}.branch3x3_1"), cin, 384, 1, 1, 0)?,
            b3_2a: BasicConv::load(w, &format!("{n}.branch3x3_2a"), 384, 384, (1, 3), 1, (0, 1))?,
            b3_2b: BasicConv::load(w, &format!("{n}.branch3x3_2b"), 384, 384, (3, 1), 1, (1, 0))?,
            d1: BasicConv::sq(w, &format!("{n}.branch3x3dbl_1"), cin, 448, 1, 1, 0)?,
            d2: BasicConv::sq(w, &format!("{n}.branch3x3dbl_2"), 448, 384, 3, 1, 1)?,
            d3a: BasicConv::load(w, &format!("{n}.branch3x3dbl_3a"), 384, 384, (1, 3), 1, (0, 1))?,
            d3b: BasicConv::load(w, &format!("{n}.branch3x3dbl_3b"), 384, 384, (3, 1), 1, (1, 0))?,
            pool: BasicConv::sq(w, &format!("{n}.branch_pool"), cin, 192, 1, 1, 0)?,
        })
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let a = self.b1.forward(x)?;
        let b0 = self.b3_1.forward(x)?;
        let b = Tensor::cat(&[self.b3_2a.forward(&b0)?, self.b3_2b.forward(&b0)?], 1)?;
        let d0 = self.d2.forward(&self.d1.forward(x)?)?;
        let d = Tensor::cat(&[self.d3a.forward(&d0)?, self.d3b.forward(&d0)?], 1)?;
        let p = self.pool.forward(&avg_pool_3x3_same(x)?)?;
        Ok(Tensor::cat(&[a, b, d, p], 1)?)
    }
}

#[derive(Debug, Clone)]
pub struct InceptionV3 {
    stem: Vec<BasicConv>,
    mixed_5: [InceptionA; 3],
    mixed_6a: InceptionB,
    mixed_6: [InceptionC; 4],
    mixed_7a: InceptionD,
    mixed_7: [InceptionE; 2],
    id: String,
}

impl InceptionV3 {
    pub fn build(w: &mut FrozenWeights) -> Result<Self> {
        let stem = vec![
            BasicConv::sq(w, "Conv2d_1a_3x3", 3, 32, 3, 2, 0)?,
            BasicConv::sq(w, "Conv2d_2a_3x3", 32, 32, 3, 1, 0)?,
            BasicConv::sq(w, "Conv2d_2b_3x3", 32, 64, 3, 1, 1)?,
            BasicConv::sq(w, "Conv2d_3b_1x1", 64, 80, 1, 1, 0)?,
            BasicConv::sq(w, "Conv2d_4a_3x3", 80, 192, 3, 1, 0)?,
        ];
        Ok(Self {
            stem,
            mixed_5: [
                InceptionA::load(w, "Mixed_5b", 192, 32)?,
                InceptionA::load(w, "Mixed_5c", 256, 64)?,
                InceptionA::load(w, "Mixed_5d", 288, 64)?,
            ],
            mixed_6a: InceptionB::load(w, "Mixed_6a", 288)?,
            mixed_6: [
                InceptionC::load(w, "Mixed_6b", 768, 128)?,
                InceptionC::load(w, "Mixed_6c", 768, 160)?,
                InceptionC::load(w, "Mixed_6d", 768, 160)?,
                InceptionC::load(w, "Mixed_6e", 768, 192)?,
            ],
            mixed_7a: InceptionD::load(w, "Mixed_7a", 768)?,
            mixed_7: [InceptionE::load(w, "Mixed_7b", 1280)?, InceptionE::load(w, "Mixed_7c", 2048)?],
            id: format!("inception-v3-pool3:{}", w.id()),
        })
    }

    pub fn load(path: impl AsRef<std::path::Path>, device: &Device) -> Result<Self> {
        Self::build(&mut FrozenWeights::load(path, device, DType::F32)?)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// `(N, 2048)` pool3 activations for a `[0,1]` RGB batch at 299×299.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut h = x.affine(2.0, -1.0)?;
        for (i, c) in self.stem.iter().enumerate() {
            h = c.forward(&h)?;
            if i == 2 || i == 4 {
                h = max_pool_3x3_s2(&h)?;
            }
        }
        for m in &self.mixed_5 {
            h = m.forward(&h)?;
        }
        h = self.mixed_6a.forward(&h)?;
        for m in &self.mixed_6 {
            h = m.forward(&h)?;
        }
        h = self.mixed_7a.forward(&h)?;
        for m in &self.mixed_7 {
            h = m.forward(&h)?;
        }
        Ok(h.mean((2, 3))?)
    }
}

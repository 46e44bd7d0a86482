//! Building blocks shared by both stages: a seeded parameter store, padded
//! convolutions, instance normalization and residual blocks, plus the
//! pretrained feature extractors used for style loss and evaluation.

pub mod frozen;
pub mod inception;
pub mod resnet;
pub mod vgg;

use std::collections::{BTreeMap, HashMap};

use candle_core::{DType, Device, Tensor, Var, D};
use candle_nn::{AdamW, Optimizer, ParamsAdamW};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Std of the normal initializer for all trainable convolutions.
pub const INIT_STD: f64 = 0.02;
pub const NORM_EPS: f64 = 1e-5;

/// Named trainable parameters, initialized from a seeded stream so that a
/// fixed seed reproduces the same network on every run.
pub struct ParamStore {
    vars: BTreeMap<String, Var>,
    device: Device,
    dtype: DType,
    rng: ChaCha8Rng,
}

impl ParamStore {
    pub fn new(seed: u64, device: &Device, dtype: DType) -> Self {
        Self {
            vars: BTreeMap::new(),
            device: device.clone(),
            dtype,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    fn insert(&mut self, name: String, values: Vec<f64>, shape: &[usize]) -> Result<Tensor> {
        if self.vars.contains_key(&name) {
            return Err(Error::Config(format!("duplicate parameter name {name}")));
        }
        let t = Tensor::from_vec(values, shape, &self.device)?.to_dtype(self.dtype)?;
        let var = Var::from_tensor(&t)?;
        let out = var.as_tensor().clone();
        self.vars.insert(name, var);
        Ok(out)
    }

    pub fn normal(&mut self, name: &str, shape: &[usize], std: f64) -> Result<Tensor> {
        let n: usize = shape.iter().product();
        let dist = Normal::new(0.0, std).map_err(|e| Error::Config(e.to_string()))?;
        let values = (0..n).map(|_| dist.sample(&mut self.rng)).collect();
        self.insert(name.to_string(), values, shape)
    }

    pub fn zeros(&mut self, name: &str, shape: &[usize]) -> Result<Tensor> {
        let n: usize = shape.iter().product();
        self.insert(name.to_string(), vec![0.0; n], shape)
    }

    pub fn scope(&mut self, prefix: &str) -> Scope<'_> {
        Scope { store: self, prefix: prefix.to_string() }
    }

    /// Parameters in name order.
    pub fn vars(&self) -> Vec<Var> {
        self.vars.values().cloned().collect()
    }

    pub fn named(&self) -> &BTreeMap<String, Var> {
        &self.vars
    }

    pub fn vars_with_prefix(&self, prefix: &str) -> Vec<Var> {
        self.vars
            .iter()
            .filter(|(k, _)| k.starts_with(prefix))
            .map(|(_, v)| v.clone())
            .collect()
    }

    pub fn num_parameters(&self) -> usize {
        self.vars.values().map(|v| v.elem_count()).sum()
    }

    /// Overwrite every parameter from `tensors` (matched by name and shape).
    pub fn assign(&self, tensors: &HashMap<String, Tensor>) -> Result<()> {
        for (name, var) in &self.vars {
            let t = tensors
                .get(name)
                .ok_or_else(|| Error::Config(format!("missing parameter {name}")))?;
            if t.dims() != var.dims() {
                return Err(Error::Shape(format!(
                    "parameter {name}: stored {:?}, expected {:?}",
                    t.dims(),
                    var.dims()
                )));
            }
            var.set(&t.to_dtype(self.dtype)?.to_device(&self.device)?)?;
        }
        if let Some(extra) = tensors.keys().find(|k| !self.vars.contains_key(*k)) {
            return Err(Error::Config(format!("unexpected parameter {extra}")));
        }
        Ok(())
    }
}

/// Prefixed view of a [`ParamStore`].
pub struct Scope<'a> {
    store: &'a mut ParamStore,
    prefix: String,
}

impl Scope<'_> {
    fn name(&self, n: &str) -> String {
        if self.prefix.is_empty() {
            n.to_string()
        } else {
            format!("{}.{n}", self.prefix)
        }
    }

    pub fn sub(&mut self, name: &str) -> Scope<'_> {
        let prefix = self.name(name);
        Scope { store: self.store, prefix }
    }

    pub fn normal(&mut self, name: &str, shape: &[usize], std: f64) -> Result<Tensor> {
        let n = self.name(name);
        self.store.normal(&n, shape, std)
    }

    pub fn zeros(&mut self, name: &str, shape: &[usize]) -> Result<Tensor> {
        let n = self.name(name);
        self.store.zeros(&n, shape)
    }

    pub fn device(&self) -> &Device {
        &self.store.device
    }

    pub fn dtype(&self) -> DType {
        self.store.dtype
    }
}

/// Reflection padding on both spatial axes.
pub fn reflect_pad(x: &Tensor, pad: usize) -> Result<Tensor> {
    if pad == 0 {
        return Ok(x.clone());
    }
    let mut out = x.clone();
    for dim in [2, 3] {
        let n = out.dim(dim)?;
        if pad >= n {
            return Err(Error::Shape(format!("reflect pad {pad} needs size > {pad}, got {n}")));
        }
        let mut parts = Vec::with_capacity(2 * pad + 1);
        for i in (1..=pad).rev() {
            parts.push(out.narrow(dim, i, 1)?);
        }
        parts.push(out.clone());
        for i in 1..=pad {
            parts.push(out.narrow(dim, n - 1 - i, 1)?);
        }
        out = Tensor::cat(&parts, dim)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    Zeros(usize),
    Reflect(usize),
}

#[derive(Debug, Clone)]
pub struct Conv2d {
    weight: Tensor,
    bias: Option<Tensor>,
    stride: usize,
    padding: Padding,
}

impl Conv2d {
    pub fn new(
        scope: &mut Scope<'_>,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: Padding,
    ) -> Result<Self> {
        let weight = scope.normal("weight", &[out_channels, in_channels, kernel, kernel], INIT_STD)?;
        let bias = Some(scope.zeros("bias", &[out_channels])?);
        Ok(Self { weight, bias, stride, padding })
    }

    /// All-zero weights and bias.
    pub fn zeroed(
        scope: &mut Scope<'_>,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        padding: Padding,
    ) -> Result<Self> {
        let weight = scope.zeros("weight", &[out_channels, in_channels, kernel, kernel])?;
        let bias = Some(scope.zeros("bias", &[out_channels])?);
        Ok(Self { weight, bias, stride: 1, padding })
    }

    /// Frozen convolution from existing tensors (pretrained extractors).
    pub fn from_tensors(weight: Tensor, bias: Option<Tensor>, stride: usize, padding: Padding) -> Self {
        Self { weight, bias, stride, padding }
    }

    pub fn out_channels(&self) -> usize {
        self.weight.dims()[0]
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let y = match self.padding {
            Padding::Zeros(p) => conv2d(x, &self.weight, p, self.stride)?,
            Padding::Reflect(p) => conv2d(&reflect_pad(x, p)?, &self.weight, 0, self.stride)?,
        };
        match &self.bias {
            Some(b) => Ok(y.broadcast_add(&b.reshape((1, b.dim(0)?, 1, 1))?)?),
            None => Ok(y),
        }
    }
}

/// Stride-2 transposed convolution doubling the spatial size
/// (kernel 3, padding 1, output padding 1).
#[derive(Debug, Clone)]
pub struct UpConv {
    weight: Tensor,
    bias: Tensor,
}

impl UpConv {
    pub fn new(scope: &mut Scope<'_>, in_channels: usize, out_channels: usize) -> Result<Self> {
        let weight = scope.normal("weight", &[in_channels, out_channels, 3, 3], INIT_STD)?;
        let bias = scope.zeros("bias", &[out_channels])?;
        Ok(Self { weight, bias })
    }

    /// Same result as `conv_transpose2d(weight, padding 1, output padding 1,
    /// stride 2)`, computed as zero insertion followed by [`conv2d`] with the
    /// flipped, transposed kernel so gradients avoid the transposed kernel.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (n, c, h, w) = x.dims4()?;
        let z = x.zeros_like()?;
        let up = Tensor::stack(&[x, &z], 4)?.reshape((n, c, h, 2 * w))?;
        let up = Tensor::stack(&[&up, &up.zeros_like()?], 3)?.reshape((n, c, 2 * h, 2 * w))?;
        // the interleave already ends in one zero row/column, so one more on each
        // side gives the 1 leading / 2 trailing frame
        let up = up.pad_with_zeros(2, 1, 1)?.pad_with_zeros(3, 1, 1)?;
        let rev = Tensor::new(&[2u32, 1, 0], x.device())?;
        let k = self.weight.index_select(&rev, 2)?.index_select(&rev, 3)?.transpose(0, 1)?.contiguous()?;
        let y = conv2d(&up, &k, 0, 1)?;
        Ok(y.broadcast_add(&self.bias.reshape((1, self.bias.dim(0)?, 1, 1))?)?)
    }
}

/// `x.conv2d(w, padding, stride)` without dilation or groups. candle's CPU
/// kernel mistakes a contiguous `(N,C,H,W)` input with `C = H = W` for a
/// channels-last one; such inputs get a zero row and column appended and the
/// extra outputs are dropped. Both sides are padded because the backward pass
/// derives its output padding from the height alone.
pub fn conv2d(x: &Tensor, w: &Tensor, padding: usize, stride: usize) -> Result<Tensor> {
    let (_, c, h, wd) = x.dims4()?;
    let (_, _, kh, kw) = w.dims4()?;
    let pointwise = kh == 1 && kw == 1 && stride == 1 && padding == 0;
    if c == h && h == wd && !pointwise {
        let out_h = (h + 2 * padding - kh) / stride + 1;
        let out_w = (wd + 2 * padding - kw) / stride + 1;
        let y = x.pad_with_zeros(2, 0, 1)?.pad_with_zeros(3, 0, 1)?.conv2d(w, padding, stride, 1, 1)?;
        return Ok(y.narrow(2, 0, out_h)?.narrow(3, 0, out_w)?);
    }
    Ok(x.conv2d(w, padding, stride, 1, 1)?)
}

/// Per-sample, per-channel normalization over spatial positions, no affine
/// parameters and no running statistics.
pub fn instance_norm(x: &Tensor) -> Result<Tensor> {
    let mean = x.mean_keepdim(D::Minus1)?.mean_keepdim(D::Minus2)?;
    let centered = x.broadcast_sub(&mean)?;
    let var = centered.sqr()?.mean_keepdim(D::Minus1)?.mean_keepdim(D::Minus2)?;
    Ok(centered.broadcast_div(&(var + NORM_EPS)?.sqrt()?)?)
}

pub fn leaky_relu(x: &Tensor, slope: f64) -> Result<Tensor> {
    Ok(x.maximum(&(x * slope)?)?)
}

/// `x + conv(relu(norm(conv(x))))` with reflection padding; normalization is optional.
#[derive(Debug, Clone)]
pub struct ResidualBlock {
    conv1: Conv2d,
    conv2: Conv2d,
    normalize: bool,
}

impl ResidualBlock {
    pub fn new(scope: &mut Scope<'_>, channels: usize, normalize: bool) -> Result<Self> {
        let conv1 = Conv2d::new(&mut scope.sub("conv1"), channels, channels, 3, 1, Padding::Reflect(1))?;
        let conv2 = Conv2d::new(&mut scope.sub("conv2"), channels, channels, 3, 1, Padding::Reflect(1))?;
        Ok(Self { conv1, conv2, normalize })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut h = self.conv1.forward(x)?;
        if self.normalize {
            h = instance_norm(&h)?;
        }
        h = self.conv2.forward(&h.relu()?)?;
        if self.normalize {
            h = instance_norm(&h)?;
        }
        Ok((x + h)?)
    }
}

/// Map `[0,1]` images to the `[-1,1]` network convention and back.
pub fn to_signed(x: &Tensor) -> Result<Tensor> {
    Ok(x.affine(2.0, -1.0)?)
}

pub fn to_unit(x: &Tensor) -> Result<Tensor> {
    Ok(x.affine(0.5, 0.5)?)
}

/// Adam with `β₁`, `β₂` and no weight decay.
pub fn adam(vars: Vec<Var>, lr: f64, beta1: f64, beta2: f64) -> Result<AdamW> {
    Ok(AdamW::new(
        vars,
        ParamsAdamW { lr, beta1, beta2, eps: 1e-8, weight_decay: 0.0 },
    )?)
}

pub(crate) fn set_lr(opt: &mut AdamW, lr: f64) {
    opt.set_learning_rate(lr);
}

pub(crate) fn scalar(t: &Tensor) -> Result<f64> {
    Ok(t.to_dtype(DType::F64)?.to_scalar::<f64>()?)
}

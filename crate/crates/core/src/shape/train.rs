use candle_core::{DType, Device, Tensor};
use candle_nn::{AdamW, Optimizer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::losses::{l1, lsgan_discriminator, lsgan_generator};
use super::networks::{Discriminator, DiscriminatorConfig, Generator, GeneratorConfig};
use crate::error::{Error, Result};
use crate::nn::{adam, scalar, set_lr, to_signed, ParamStore};
use crate::sketchdata::{GrayscalePhoto, NoiseTag, SketchImage};

pub const T_PREFIX: &str = "T";
pub const T_PRIME_PREFIX: &str = "T_prime";
pub const D_G_PREFIX: &str = "D_G";
pub const D_S_PREFIX: &str = "D_S";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapeNetConfig {
    pub base_channels: usize,
    pub residual_blocks: usize,
    pub disc_channels: usize,
    pub attention: bool,
}

impl Default for ShapeNetConfig {
    fn default() -> Self {
        Self { base_channels: 64, residual_blocks: 9, disc_channels: 64, attention: true }
    }
}

/// The four stage-1 networks: `T: S → G`, `T′: G → S`, `D_G`, `D_S`.
pub struct ShapeNetworks {
    pub params: ParamStore,
    pub t: Generator,
    pub t_prime: Generator,
    pub d_g: Discriminator,
    pub d_s: Discriminator,
    pub config: ShapeNetConfig,
}

impl ShapeNetworks {
    pub fn new(config: ShapeNetConfig, seed: u64, device: &Device, dtype: DType) -> Result<Self> {
        let mut params = ParamStore::new(seed, device, dtype);
        let mut t_cfg = GeneratorConfig::sketch_to_gray(config.base_channels, config.residual_blocks);
        t_cfg.attention = config.attention;
        let t = Generator::new(&mut params.scope(T_PREFIX), t_cfg)?;
        let t_prime = Generator::new(
            &mut params.scope(T_PRIME_PREFIX),
            GeneratorConfig::gray_to_sketch(config.base_channels, config.residual_blocks),
        )?;
        let dcfg = DiscriminatorConfig { in_channels: 1, base_channels: config.disc_channels };
        let d_g = Discriminator::new(&mut params.scope(D_G_PREFIX), dcfg)?;
        let d_s = Discriminator::new(&mut params.scope(D_S_PREFIX), dcfg)?;
        Ok(Self { params, t, t_prime, d_g, d_s, config })
    }

    pub fn device(&self) -> &Device {
        self.params.device()
    }

    pub fn dtype(&self) -> DType {
        self.params.dtype()
    }

    fn generator_vars(&self) -> Vec<candle_core::Var> {
        let mut v = self.params.vars_with_prefix(&format!("{T_PREFIX}."));
        v.extend(self.params.vars_with_prefix(&format!("{T_PRIME_PREFIX}.")));
        v
    }

    /// Sketch to grayscale photo through `T` (attention active).
    pub fn sketch_to_gray(&self, sketch: &SketchImage) -> Result<GrayscalePhoto> {
        let x = to_signed(&sketch.to_tensor(self.device(), self.dtype())?)?;
        let y = self.t.forward(&x, true)?;
        GrayscalePhoto::from_tensor(&crate::nn::to_unit(&y)?)
    }

    /// Grayscale photo to sketch through `T′`.
    pub fn gray_to_sketch(&self, gray: &GrayscalePhoto) -> Result<SketchImage> {
        let x = to_signed(&gray.to_tensor(self.device(), self.dtype())?)?;
        let y = self.t_prime.forward(&x, false)?;
        SketchImage::from_tensor(&crate::nn::to_unit(&y)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeHyper {
    /// λ₁, shared by both adversarial directions.
    pub lambda_adv: f64,
    /// λ₂
    pub lambda_cycle: f64,
    /// λ₃
    pub lambda_identity: f64,
    pub lambda_self_supervised: f64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Past-fake buffer for discriminator updates; 0 disables it.
    pub buffer_size: usize,
}

impl Default for ShapeHyper {
    fn default() -> Self {
        Self {
            lambda_adv: 1.0,
            lambda_cycle: 10.0,
            lambda_identity: 0.5,
            lambda_self_supervised: 1.0,
            lr: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            buffer_size: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeItem {
    /// Possibly noise-composed input sketch.
    pub sketch: SketchImage,
    pub clean: SketchImage,
    pub tag: NoiseTag,
    pub gray: GrayscalePhoto,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeBatch {
    pub items: Vec<ShapeItem>,
}

impl ShapeBatch {
    pub fn single(sketch: SketchImage, clean: SketchImage, tag: NoiseTag, gray: GrayscalePhoto) -> Self {
        Self { items: vec![ShapeItem { sketch, clean, tag, gray }] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.items.is_empty() {
            return Err(Error::InvalidInput("empty shape batch".into()));
        }
        for (i, it) in self.items.iter().enumerate() {
            if it.tag.is_clean() && it.sketch != it.clean {
                return Err(Error::InvalidInput(format!("item {i}: clean tag but sketch differs from original")));
            }
        }
        Ok(())
    }

    /// `[-1,1]` tensors `(sketch, clean, gray)` plus the noise indicator per item.
    pub fn tensors(&self, device: &Device, dtype: DType) -> Result<BatchTensors> {
        self.validate()?;
        let stack = |f: &dyn Fn(&ShapeItem) -> Result<Tensor>| -> Result<Tensor> {
            let parts = self.items.iter().map(f).collect::<Result<Vec<_>>>()?;
            to_signed(&Tensor::cat(&parts, 0)?)
        };
        let noise: Vec<f64> = self.items.iter().map(|i| if i.tag.is_clean() { 0.0 } else { 1.0 }).collect();
        Ok(BatchTensors {
            sketch: stack(&|i| i.sketch.to_tensor(device, dtype))?,
            clean: stack(&|i| i.clean.to_tensor(device, dtype))?,
            gray: stack(&|i| i.gray.to_tensor(device, dtype))?,
            noise: Tensor::from_vec(noise, self.items.len(), device)?.to_dtype(dtype)?,
        })
    }
}

pub struct BatchTensors {
    pub sketch: Tensor,
    pub clean: Tensor,
    pub gray: Tensor,
    /// 1 for noise-composed items, 0 for clean ones.
    pub noise: Tensor,
}

/// Differentiable generator-side terms for one batch.
pub struct GeneratorTerms {
    pub adv_t: Tensor,
    pub adv_t_prime: Tensor,
    pub cycle: Tensor,
    pub identity: Tensor,
    pub self_supervised: Tensor,
    pub total: Tensor,
    pub fake_gray: Tensor,
    pub fake_sketch: Tensor,
}

/// Per-item mean absolute error over all but the batch axis.
fn per_item_l1(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    Ok((a - b)?.abs()?.flatten_from(1)?.mean(1)?)
}

/// All five generator terms and their weighted total. The sketch-side
/// reconstruction `|S_clean − T′(T(S_in))|` counts as cycle for clean items
/// and as the self-supervised term for noise-composed ones.
pub fn generator_terms(nets: &ShapeNetworks, hyper: &ShapeHyper, b: &BatchTensors) -> Result<GeneratorTerms> {
    let fake_gray = nets.t.forward(&b.sketch, true)?;
    let rec_sketch = nets.t_prime.forward(&fake_gray, false)?;
    let fake_sketch = nets.t_prime.forward(&b.gray, false)?;
    let rec_gray = nets.t.forward(&fake_sketch, true)?;

    let adv_t = lsgan_generator(&nets.d_g.forward(&fake_gray)?)?;
    let adv_t_prime = lsgan_generator(&nets.d_s.forward(&fake_sketch)?)?;

    let sketch_rec = per_item_l1(&b.clean, &rec_sketch)?;
    let clean = b.noise.affine(-1.0, 1.0)?;
    let cycle_sketch = (&sketch_rec * &clean)?.mean_all()?;
    let self_supervised = (&sketch_rec * &b.noise)?.mean_all()?;
    let cycle = (cycle_sketch + l1(&b.gray, &rec_gray)?)?;

    let identity = (l1(&b.clean, &nets.t_prime.forward(&b.clean, false)?)?
        + l1(&b.gray, &nets.t.forward(&b.gray, true)?)?)?;

    let total = ((((&adv_t + &adv_t_prime)? * hyper.lambda_adv)? + (&cycle * hyper.lambda_cycle)?)?
        + ((&identity * hyper.lambda_identity)? + (&self_supervised * hyper.lambda_self_supervised)?)?)?;
    Ok(GeneratorTerms { adv_t, adv_t_prime, cycle, identity, self_supervised, total, fake_gray, fake_sketch })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ShapeLossReport {
    pub adv_t: f64,
    pub adv_t_prime: f64,
    pub cycle: f64,
    pub identity: f64,
    pub self_supervised: f64,
    /// Weighted generator objective.
    pub total: f64,
    pub disc_g: f64,
    pub disc_s: f64,
}

impl ShapeLossReport {
    pub fn is_finite(&self) -> bool {
        [self.adv_t, self.adv_t_prime, self.cycle, self.identity, self.self_supervised, self.total, self.disc_g, self.disc_s]
            .iter()
            .all(|v| v.is_finite())
    }

    pub fn weighted_total(&self, h: &ShapeHyper) -> f64 {
        h.lambda_adv * (self.adv_t + self.adv_t_prime)
            + h.lambda_cycle * self.cycle
            + h.lambda_identity * self.identity
            + h.lambda_self_supervised * self.self_supervised
    }
}

/// History of generated images for discriminator updates: once full, each
/// query returns a stored image (replacing it) with probability 0.5.
pub struct ImageBuffer {
    capacity: usize,
    images: Vec<Tensor>,
}

impl ImageBuffer {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, images: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn query(&mut self, batch: &Tensor, rng: &mut impl Rng) -> Result<Tensor> {
        let batch = batch.detach();
        if self.capacity == 0 {
            return Ok(batch);
        }
        let mut out = Vec::with_capacity(batch.dim(0)?);
        for i in 0..batch.dim(0)? {
            let img = batch.narrow(0, i, 1)?;
            if self.images.len() < self.capacity {
                self.images.push(img.clone());
                out.push(img);
            } else if rng.random::<f64>() < 0.5 {
                let j = rng.random_range(0..self.capacity as u32) as usize;
                out.push(std::mem::replace(&mut self.images[j], img));
            } else {
                out.push(img);
            }
        }
        Ok(Tensor::cat(&out, 0)?)
    }
}

/// Single-writer training state for the shape stage.
pub struct ShapeTrainer {
    pub nets: ShapeNetworks,
    pub hyper: ShapeHyper,
    opt_gen: AdamW,
    opt_d_g: AdamW,
    opt_d_s: AdamW,
    buffer_gray: ImageBuffer,
    buffer_sketch: ImageBuffer,
    rng: ChaCha8Rng,
    step: u64,
}

impl ShapeTrainer {
    pub fn new(nets: ShapeNetworks, hyper: ShapeHyper, seed: u64) -> Result<Self> {
        let opt_gen = adam(nets.generator_vars(), hyper.lr, hyper.beta1, hyper.beta2)?;
        let opt_d_g = adam(nets.params.vars_with_prefix(&format!("{D_G_PREFIX}.")), hyper.lr, hyper.beta1, hyper.beta2)?;
        let opt_d_s = adam(nets.params.vars_with_prefix(&format!("{D_S_PREFIX}.")), hyper.lr, hyper.beta1, hyper.beta2)?;
        Ok(Self {
            nets,
            hyper,
            opt_gen,
            opt_d_g,
            opt_d_s,
            buffer_gray: ImageBuffer::new(hyper.buffer_size),
            buffer_sketch: ImageBuffer::new(hyper.buffer_size),
            rng: ChaCha8Rng::seed_from_u64(seed),
            step: 0,
        })
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn learning_rate(&self) -> f64 {
        self.opt_gen.learning_rate()
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        set_lr(&mut self.opt_gen, lr);
        set_lr(&mut self.opt_d_g, lr);
        set_lr(&mut self.opt_d_s, lr);
    }

    /// One generator update (T, T′ and the attention head jointly), then one
    /// update each for `D_G` and `D_S`.
    pub fn step(&mut self, batch: &ShapeBatch) -> Result<ShapeLossReport> {
        let b = batch.tensors(self.nets.device(), self.nets.dtype())?;
        let terms = generator_terms(&self.nets, &self.hyper, &b)?;
        let mut report = ShapeLossReport {
            adv_t: scalar(&terms.adv_t)?,
            adv_t_prime: scalar(&terms.adv_t_prime)?,
            cycle: scalar(&terms.cycle)?,
            identity: scalar(&terms.identity)?,
            self_supervised: scalar(&terms.self_supervised)?,
            total: scalar(&terms.total)?,
            ..Default::default()
        };
        self.check_finite(&report)?;
        self.opt_gen.backward_step(&terms.total)?;

        let fake_gray = self.buffer_gray.query(&terms.fake_gray, &mut self.rng)?;
        let d_g_loss = lsgan_discriminator(&self.nets.d_g.forward(&b.gray)?, &self.nets.d_g.forward(&fake_gray)?)?;
        let fake_sketch = self.buffer_sketch.query(&terms.fake_sketch, &mut self.rng)?;
        let d_s_loss =
            lsgan_discriminator(&self.nets.d_s.forward(&b.clean)?, &self.nets.d_s.forward(&fake_sketch)?)?;
        report.disc_g = scalar(&d_g_loss)?;
        report.disc_s = scalar(&d_s_loss)?;
        self.check_finite(&report)?;
        self.opt_d_g.backward_step(&d_g_loss)?;
        self.opt_d_s.backward_step(&d_s_loss)?;

        self.step += 1;
        Ok(report)
    }

    fn check_finite(&self, report: &ShapeLossReport) -> Result<()> {
        if report.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite {
                step: self.step,
                snapshot: serde_json::to_string(report).unwrap_or_else(|_| format!("{report:?}")),
            })
        }
    }
}

/// Learning rate for `epoch` (0-based epochs completed): constant for the
/// first `constant_epochs`, then linear decay to zero at `total_epochs`.
pub fn lr_schedule_with(epoch: usize, total_epochs: usize, base_lr: f64, constant_epochs: usize) -> f64 {
    if epoch <= constant_epochs || total_epochs <= constant_epochs {
        return base_lr;
    }
    let remaining = total_epochs.saturating_sub(epoch) as f64;
    base_lr * remaining / (total_epochs - constant_epochs) as f64
}

/// [`lr_schedule_with`] using the 100-epoch constant phase.
pub fn lr_schedule(epoch: usize, total_epochs: usize, base_lr: f64) -> f64 {
    lr_schedule_with(epoch, total_epochs, base_lr, 100)
}

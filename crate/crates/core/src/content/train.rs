use candle_core::{DType, Device, Tensor};
use candle_nn::{AdamW, Optimizer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adain::adain;
use super::losses::{loss_content, loss_intensity, loss_style, StyleFeatures};
use super::networks::{ContentNetConfig, Decoder, Encoder};
use crate::error::{Error, Result};
use crate::nn::{adam, scalar, set_lr, ParamStore};
use crate::shape::{lsgan_discriminator, lsgan_generator, Discriminator, DiscriminatorConfig};
use crate::sketchdata::{ColorPhoto, GrayscalePhoto};

pub const E_PREFIX: &str = "E";
pub const DEC_PREFIX: &str = "D";
pub const D_I_PREFIX: &str = "D_I";

/// Encoder, decoder and photo discriminator `D_I`. One parameter set
/// serves both the reference and the no-reference path.
pub struct ContentNetworks {
    pub params: ParamStore,
    pub encoder: Encoder,
    pub decoder: Decoder,
    pub d_i: Discriminator,
    pub config: ContentNetConfig,
}

impl ContentNetworks {
    pub fn new(config: ContentNetConfig, seed: u64, device: &Device, dtype: DType) -> Result<Self> {
        let mut params = ParamStore::new(seed, device, dtype);
        let encoder = Encoder::new(&mut params.scope(E_PREFIX), config.base_channels)?;
        let decoder = Decoder::new(&mut params.scope(DEC_PREFIX), config.base_channels, config.residual_blocks)?;
        let d_i = Discriminator::new(
            &mut params.scope(D_I_PREFIX),
            DiscriminatorConfig { in_channels: 3, base_channels: config.disc_channels },
        )?;
        Ok(Self { params, encoder, decoder, d_i, config })
    }

    pub fn device(&self) -> &Device {
        self.params.device()
    }

    pub fn dtype(&self) -> DType {
        self.params.dtype()
    }

    /// `t = AdaIN(E(G), E(R))`, or the sentinel normalization without `R`.
    pub fn transfer(&self, gray: &Tensor, reference: Option<&Tensor>) -> Result<Tensor> {
        let x = self.encoder.forward(gray)?;
        match reference {
            Some(r) => adain(&x, Some(&self.encoder.forward(r)?)),
            None => adain(&x, None),
        }
    }

    pub fn enrich_tensor(&self, gray: &Tensor, reference: Option<&Tensor>) -> Result<Tensor> {
        self.decoder.forward(&self.transfer(gray, reference)?)
    }

    /// Colorize a grayscale photo, optionally following a reference's style.
    pub fn enrich(&self, gray: &GrayscalePhoto, reference: Option<&ColorPhoto>) -> Result<ColorPhoto> {
        let g = gray.to_tensor(self.device(), self.dtype())?;
        let r = match reference {
            Some(r) => {
                if (r.width(), r.height()) != (gray.width(), gray.height()) {
                    return Err(Error::Shape(format!(
                        "reference {}×{} vs input {}×{}",
                        r.width(),
                        r.height(),
                        gray.width(),
                        gray.height()
                    )));
                }
                Some(r.to_tensor(self.device(), self.dtype())?)
            }
            None => None,
        };
        ColorPhoto::from_tensor(&self.enrich_tensor(&g, r.as_ref())?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContentHyper {
    /// λ₄
    pub lambda_adv: f64,
    /// λ₅
    pub lambda_intensity: f64,
    /// λ₆
    pub lambda_style: f64,
    /// λ₇
    pub lambda_content: f64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub p_reference: f64,
}

impl Default for ContentHyper {
    fn default() -> Self {
        Self {
            lambda_adv: 1.0,
            lambda_intensity: 10.0,
            lambda_style: 0.1,
            lambda_content: 0.05,
            lr: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            p_reference: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ContentLossReport {
    pub adv: f64,
    pub intensity: f64,
    pub style: f64,
    pub content: f64,
    /// Weighted generator objective.
    pub total: f64,
    pub disc_i: f64,
    pub used_reference: bool,
}

impl ContentLossReport {
    pub fn weighted_total(&self, h: &ContentHyper) -> f64 {
        h.lambda_adv * self.adv
            + h.lambda_intensity * self.intensity
            + h.lambda_style * self.style
            + h.lambda_content * self.content
    }

    fn is_finite(&self) -> bool {
        [self.adv, self.intensity, self.style, self.content, self.total, self.disc_i].iter().all(|v| v.is_finite())
    }
}

/// One seeded draw: use a reference this step with probability `p`.
pub fn draw_reference(rng: &mut impl Rng, p: f64) -> bool {
    rng.random::<f64>() < p
}

/// Differentiable generator-side terms; style and content are `None` on
/// the no-reference path.
pub struct ContentTerms {
    pub output: Tensor,
    pub adv: Tensor,
    pub intensity: Tensor,
    pub style: Option<Tensor>,
    pub content: Option<Tensor>,
    pub total: Tensor,
}

pub fn content_terms(
    nets: &ContentNetworks,
    hyper: &ContentHyper,
    style: Option<&dyn StyleFeatures>,
    gray: &Tensor,
    reference: Option<&Tensor>,
) -> Result<ContentTerms> {
    let t = nets.transfer(gray, reference)?;
    let output = nets.decoder.forward(&t)?;
    let adv = lsgan_generator(&nets.d_i.forward(&output)?)?;
    let intensity = loss_intensity(gray, &output)?;
    let mut total = ((&adv * hyper.lambda_adv)? + (&intensity * hyper.lambda_intensity)?)?;
    let (mut style_t, mut content_t) = (None, None);
    if let Some(r) = reference {
        let phi = style.ok_or_else(|| {
            Error::Config("reference-mode training needs a style extractor (style_extractor_path)".into())
        })?;
        let s = loss_style(&output, r, phi)?;
        let e = |x: &Tensor| nets.encoder.forward(x);
        let d = |x: &Tensor| nets.decoder.forward(x);
        let c = loss_content(&e, &d, &t)?;
        total = ((total + (&s * hyper.lambda_style)?)? + (&c * hyper.lambda_content)?)?;
        style_t = Some(s);
        content_t = Some(c);
    }
    Ok(ContentTerms { output, adv, intensity, style: style_t, content: content_t, total })
}

pub struct ContentTrainer {
    pub nets: ContentNetworks,
    pub hyper: ContentHyper,
    style: Option<Box<dyn StyleFeatures + Send + Sync>>,
    opt_gen: AdamW,
    opt_d: AdamW,
    rng: ChaCha8Rng,
    step: u64,
}

impl ContentTrainer {
    pub fn new(
        nets: ContentNetworks,
        hyper: ContentHyper,
        style: Option<Box<dyn StyleFeatures + Send + Sync>>,
        seed: u64,
    ) -> Result<Self> {
        let mut gen_vars = nets.params.vars_with_prefix(&format!("{E_PREFIX}."));
        gen_vars.extend(nets.params.vars_with_prefix(&format!("{DEC_PREFIX}.")));
        let opt_gen = adam(gen_vars, hyper.lr, hyper.beta1, hyper.beta2)?;
        let opt_d = adam(nets.params.vars_with_prefix(&format!("{D_I_PREFIX}.")), hyper.lr, hyper.beta1, hyper.beta2)?;
        Ok(Self { nets, hyper, style, opt_gen, opt_d, rng: ChaCha8Rng::seed_from_u64(seed), step: 0 })
    }

    pub fn has_style_extractor(&self) -> bool {
        self.style.is_some()
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        set_lr(&mut self.opt_gen, lr);
        set_lr(&mut self.opt_d, lr);
    }

    pub fn learning_rate(&self) -> f64 {
        self.opt_gen.learning_rate()
    }

    /// Seeded reference draw for the next step. Without a style extractor
    /// the reference path is unavailable and the draw is always false (the
    /// rng still advances so streams stay aligned).
    pub fn draw_reference(&mut self) -> bool {
        let hit = draw_reference(&mut self.rng, self.hyper.p_reference);
        hit && self.style.is_some()
    }

    /// Index in `0..n`, from the trainer's stream.
    pub fn pick(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n as u32) as usize
    }

    /// One generator update (E and D jointly), then one `D_I` update with
    /// `real` as the positive sample.
    pub fn step(
        &mut self,
        gray: &GrayscalePhoto,
        real: &ColorPhoto,
        reference: Option<&ColorPhoto>,
    ) -> Result<ContentLossReport> {
        let (dev, dt) = (self.nets.device().clone(), self.nets.dtype());
        let g = gray.to_tensor(&dev, dt)?;
        let real_t = real.to_tensor(&dev, dt)?;
        let r = reference.map(|r| r.to_tensor(&dev, dt)).transpose()?;
        let style = self.style.as_deref().map(|s| s as &dyn StyleFeatures);
        let terms = content_terms(&self.nets, &self.hyper, style, &g, r.as_ref())?;
        let opt = |t: &Option<Tensor>| t.as_ref().map(scalar).transpose().map(|v| v.unwrap_or(0.0));
        let mut report = ContentLossReport {
            adv: scalar(&terms.adv)?,
            intensity: scalar(&terms.intensity)?,
            style: opt(&terms.style)?,
            content: opt(&terms.content)?,
            total: scalar(&terms.total)?,
            disc_i: 0.0,
            used_reference: reference.is_some(),
        };
        self.check_finite(&report)?;
        self.opt_gen.backward_step(&terms.total)?;

        let d_loss = lsgan_discriminator(&self.nets.d_i.forward(&real_t)?, &self.nets.d_i.forward(&terms.output.detach())?)?;
        report.disc_i = scalar(&d_loss)?;
        self.check_finite(&report)?;
        self.opt_d.backward_step(&d_loss)?;
        self.step += 1;
        Ok(report)
    }

    fn check_finite(&self, report: &ContentLossReport) -> Result<()> {
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

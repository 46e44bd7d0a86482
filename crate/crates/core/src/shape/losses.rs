//! Shape-stage objectives. Every function returns a differentiable scalar
//! tensor; values are in whatever units the images are given in (the
//! trainer works in `[-1,1]`).
//!
//! Adversarial terms use the least-squares convention: the discriminator
//! pushes real scores to 1 and fake scores to 0, the generator pushes fake
//! scores to 1.

use candle_core::Tensor;

use super::networks::{Discriminator, Generator};
use crate::error::{Error, Result};
use crate::sketchdata::NoiseTag;

/// Anything that maps an image batch to an image batch.
pub trait ImageMap {
    fn map(&self, x: &Tensor) -> Result<Tensor>;
}

impl<F> ImageMap for F
where
    F: Fn(&Tensor) -> Result<Tensor>,
{
    fn map(&self, x: &Tensor) -> Result<Tensor> {
        self(x)
    }
}

/// Generators map with their attention head active (when they have one).
impl ImageMap for Generator {
    fn map(&self, x: &Tensor) -> Result<Tensor> {
        self.forward(x, true)
    }
}

/// Anything that scores an image batch patch-wise.
pub trait Critic {
    fn score(&self, x: &Tensor) -> Result<Tensor>;
}

impl Critic for Discriminator {
    fn score(&self, x: &Tensor) -> Result<Tensor> {
        self.forward(x)
    }
}

/// Wraps a closure as a [`Critic`].
pub struct CriticFn<F>(pub F);

impl<F> Critic for CriticFn<F>
where
    F: Fn(&Tensor) -> Result<Tensor>,
{
    fn score(&self, x: &Tensor) -> Result<Tensor> {
        (self.0)(x)
    }
}

/// Per-element mean absolute difference.
pub fn l1(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.dims() != b.dims() {
        return Err(Error::Shape(format!("l1 operands {:?} vs {:?}", a.dims(), b.dims())));
    }
    Ok((a - b)?.abs()?.mean_all()?)
}

/// `mean((real − 1)²) + mean(fake²)` over score maps.
pub fn lsgan_discriminator(real_scores: &Tensor, fake_scores: &Tensor) -> Result<Tensor> {
    let real = real_scores.affine(1.0, -1.0)?.sqr()?.mean_all()?;
    let fake = fake_scores.sqr()?.mean_all()?;
    Ok((real + fake)?)
}

/// `mean((fake − 1)²)` over a score map.
pub fn lsgan_generator(fake_scores: &Tensor) -> Result<Tensor> {
    Ok(fake_scores.affine(1.0, -1.0)?.sqr()?.mean_all()?)
}

/// Discriminator objective; `fake` is detached so only `d` receives gradients.
pub fn loss_discriminator(d: &dyn Critic, real: &Tensor, fake: &Tensor) -> Result<Tensor> {
    lsgan_discriminator(&d.score(real)?, &d.score(&fake.detach())?)
}

pub fn loss_generator_adv(d: &dyn Critic, fake: &Tensor) -> Result<Tensor> {
    lsgan_generator(&d.score(fake)?)
}

/// `mean|S − T′(T(S))| + mean|G − T(T′(G))|`.
pub fn loss_cycle(t: &dyn ImageMap, t_prime: &dyn ImageMap, s: &Tensor, g: &Tensor) -> Result<Tensor> {
    let rec_s = t_prime.map(&t.map(s)?)?;
    let rec_g = t.map(&t_prime.map(g)?)?;
    Ok((l1(s, &rec_s)? + l1(g, &rec_g)?)?)
}

/// `mean|S − T′(S)| + mean|G − T(G)|`.
pub fn loss_identity(t: &dyn ImageMap, t_prime: &dyn ImageMap, s: &Tensor, g: &Tensor) -> Result<Tensor> {
    Ok((l1(s, &t_prime.map(s)?)? + l1(g, &t.map(g)?)?)?)
}

/// `mean|S_clean − T′(T(S_noise))|`; only defined for noise-composed sketches.
pub fn loss_self_supervised(
    t: &dyn ImageMap,
    t_prime: &dyn ImageMap,
    s_clean: &Tensor,
    s_noise: &Tensor,
    tag: NoiseTag,
) -> Result<Tensor> {
    if tag.is_clean() {
        return Err(Error::InvalidInput(
            "self-supervised loss needs a noise-composed sketch; use the cycle loss for clean ones".into(),
        ));
    }
    l1(s_clean, &t_prime.map(&t.map(s_noise)?)?)
}

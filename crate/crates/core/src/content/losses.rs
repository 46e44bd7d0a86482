use candle_core::Tensor;

use super::adain::StyleStats;
use super::lab::rgb_to_lab_tensor;
use crate::error::{Error, Result};
use crate::nn::vgg::VggFeatures;
use crate::shape::{l1, ImageMap};

/// Fixed feature taps for the style loss.
pub trait StyleFeatures {
    fn features(&self, x: &Tensor) -> Result<Vec<Tensor>>;
}

impl StyleFeatures for VggFeatures {
    fn features(&self, x: &Tensor) -> Result<Vec<Tensor>> {
        self.forward(x)
    }
}

/// Wraps a closure as [`StyleFeatures`].
pub struct StyleFn<F>(pub F);

impl<F> StyleFeatures for StyleFn<F>
where
    F: Fn(&Tensor) -> Result<Vec<Tensor>>,
{
    fn features(&self, x: &Tensor) -> Result<Vec<Tensor>> {
        (self.0)(x)
    }
}

/// `mean|G − L(output)/100|`, with `G` `(N,1,H,W)` and `output` `(N,3,H,W)`, both in `[0,1]`.
pub fn loss_intensity(gray: &Tensor, output: &Tensor) -> Result<Tensor> {
    let (n, c, h, w) = gray.dims4()?;
    let (on, _, oh, ow) = output.dims4()?;
    if c != 1 || (n, h, w) != (on, oh, ow) {
        return Err(Error::Shape(format!("intensity loss: {:?} vs {:?}", gray.dims(), output.dims())));
    }
    let l = rgb_to_lab_tensor(output)?.narrow(1, 0, 1)?;
    l1(gray, &(l / 100.0)?)
}

/// `mean|E(D(t)) − t|`; the target `t` is held fixed.
pub fn loss_content(encoder: &dyn ImageMap, decoder: &dyn ImageMap, t: &Tensor) -> Result<Tensor> {
    let re = encoder.map(&decoder.map(t)?)?;
    l1(&re, &t.detach())
}

// added under the root so the norm has a finite derivative at zero difference
const NORM_FLOOR: f64 = 1e-16;

fn euclidean_per_item(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    Ok(((a - b)?.sqr()?.flatten_from(1)?.sum(1)? + NORM_FLOOR)?.sqrt()?)
}

/// `Σᵢ ‖μ(φᵢ(out)) − μ(φᵢ(R))‖₂ + ‖σ(φᵢ(out)) − σ(φᵢ(R))‖₂`, averaged over the batch.
pub fn loss_style(output: &Tensor, reference: &Tensor, phi: &dyn StyleFeatures) -> Result<Tensor> {
    if output.dims() != reference.dims() {
        return Err(Error::Shape(format!("style loss: {:?} vs {:?}", output.dims(), reference.dims())));
    }
    let fo = phi.features(output)?;
    let fr = phi.features(reference)?;
    if fo.is_empty() || fo.len() != fr.len() {
        return Err(Error::Config("style extractor returned no layers".into()));
    }
    let mut total: Option<Tensor> = None;
    for (a, b) in fo.iter().zip(&fr) {
        let (sa, sb) = (StyleStats::of(a)?, StyleStats::of(&b.detach())?);
        let term = (euclidean_per_item(&sa.mean, &sb.mean)? + euclidean_per_item(&sa.std, &sb.std)?)?.mean_all()?;
        total = Some(match total {
            Some(t) => (t + term)?,
            None => term,
        });
    }
    Ok(total.expect("at least one layer"))
}

#[cfg(test)]
mod tests {
    use candle_core::{DType, Device};

    use super::*;
    use crate::nn::scalar;

    #[test]
    fn intensity_of_matching_gray_is_zero() {
        let dev = Device::Cpu;
        let out = Tensor::full(0.5f64, (1, 3, 4, 4), &dev).unwrap();
        let l = scalar(&rgb_to_lab_tensor(&out).unwrap().narrow(1, 0, 1).unwrap().mean_all().unwrap()).unwrap();
        let g = Tensor::full(l / 100.0, (1, 1, 4, 4), &dev).unwrap();
        assert!(scalar(&loss_intensity(&g, &out).unwrap()).unwrap() < 1e-12);
        let g2 = (&g + 0.2).unwrap();
        assert!((scalar(&loss_intensity(&g2, &out).unwrap()).unwrap() - 0.2).abs() < 1e-9);
    }

    #[test]
    fn content_offset() {
        let t = Tensor::randn(0f64, 1., (1, 2, 3, 3), &Device::Cpu).unwrap();
        let d = |x: &Tensor| -> Result<Tensor> { Ok(x.clone()) };
        let e = |x: &Tensor| -> Result<Tensor> { Ok(x.affine(1.0, 0.3)?) };
        assert!((scalar(&loss_content(&e, &d, &t).unwrap()).unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn style_is_euclidean_in_means() {
        let dev = Device::Cpu;
        let phi = StyleFn(|x: &Tensor| -> Result<Vec<Tensor>> { Ok(vec![x.clone()]) });
        let a = Tensor::zeros((1, 2, 2, 2), DType::F64, &dev).unwrap();
        let shift = Tensor::new(&[3f64, 4.], &dev).unwrap().reshape((1, 2, 1, 1)).unwrap();
        let b = a.broadcast_add(&shift).unwrap();
        assert!((scalar(&loss_style(&a, &b, &phi).unwrap()).unwrap() - 5.0).abs() < 1e-6);
        assert!(scalar(&loss_style(&b, &b, &phi).unwrap()).unwrap() < 1e-6);
    }
}

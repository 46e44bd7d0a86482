use candle_core::{Tensor, D};

use crate::error::{Error, Result};
use crate::nn::NORM_EPS;

/// Per-sample, per-channel mean and population std of a feature map, both
/// shaped `(N, C, 1, 1)`. The std carries [`NORM_EPS`] inside the root.
#[derive(Debug, Clone)]
pub struct StyleStats {
    pub mean: Tensor,
    pub std: Tensor,
}

impl StyleStats {
    pub fn of(x: &Tensor) -> Result<Self> {
        let (_, _, h, w) = x.dims4()?;
        if h * w == 0 {
            return Err(Error::Shape("statistics of an empty feature map".into()));
        }
        let mean = x.mean_keepdim(D::Minus1)?.mean_keepdim(D::Minus2)?;
        let var = x.broadcast_sub(&mean)?.sqr()?.mean_keepdim(D::Minus1)?.mean_keepdim(D::Minus2)?;
        Ok(Self { mean, std: (var + NORM_EPS)?.sqrt()? })
    }

    /// Explicit statistics for a single sample, one entry per channel.
    pub fn from_values(mean: &[f64], std: &[f64], like: &Tensor) -> Result<Self> {
        if mean.len() != std.len() || std.iter().any(|s| *s < 0.0) {
            return Err(Error::InvalidInput("style stats need equal lengths and σ ≥ 0".into()));
        }
        let c = mean.len();
        let mk = |v: &[f64]| -> Result<Tensor> {
            Ok(Tensor::from_slice(v, (1, c, 1, 1), like.device())?.to_dtype(like.dtype())?)
        };
        Ok(Self { mean: mk(mean)?, std: mk(std)? })
    }

    pub fn channels(&self) -> usize {
        self.mean.dims()[1]
    }
}

/// Normalize `x` per channel, then impose the reference statistics:
/// `σ_r·(x − μ(x))/σ(x) + μ_r`. With `None` (no reference) the target
/// statistics are `μ = 0`, `σ = 1`.
pub fn adain(x: &Tensor, reference: Option<&Tensor>) -> Result<Tensor> {
    match reference {
        Some(r) => adain_with_stats(x, &StyleStats::of(r)?),
        None => normalize(x),
    }
}

fn normalize(x: &Tensor) -> Result<Tensor> {
    let s = StyleStats::of(x)?;
    Ok(x.broadcast_sub(&s.mean)?.broadcast_div(&s.std)?)
}

pub fn adain_with_stats(x: &Tensor, target: &StyleStats) -> Result<Tensor> {
    let c = x.dims4()?.1;
    if target.channels() != c {
        return Err(Error::Shape(format!("AdaIN channel mismatch: {c} vs {}", target.channels())));
    }
    Ok(normalize(x)?.broadcast_mul(&target.std)?.broadcast_add(&target.mean)?)
}

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::extract::FeatureExtractor;
use crate::error::{Error, Result};
use crate::sketchdata::ColorPhoto;

/// Gaussian fit of a set of activation vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationStats {
    pub mean: DVector<f64>,
    /// Unbiased (n − 1) covariance.
    pub cov: DMatrix<f64>,
    pub count: usize,
}

impl ActivationStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn from_parts(mean: Vec<f64>, cov: Vec<f64>, count: usize) -> Result<Self> {
        let d = mean.len();
        if cov.len() != d * d {
            return Err(Error::Shape(format!("covariance needs {} entries, got {}", d * d, cov.len())));
        }
        Ok(Self { mean: DVector::from_vec(mean), cov: DMatrix::from_row_slice(d, d, &cov), count })
    }
}

pub fn activation_stats_from_vectors(vectors: &[Vec<f64>]) -> Result<ActivationStats> {
    let n = vectors.len();
    if n < 2 {
        return Err(Error::InvalidInput(format!("activation statistics need at least 2 samples, got {n}")));
    }
    let d = vectors[0].len();
    if d == 0 || vectors.iter().any(|v| v.len() != d) {
        return Err(Error::Shape("activation vectors must share a positive length".into()));
    }
    let x = DMatrix::from_fn(n, d, |i, j| vectors[i][j]);
    let mean = x.row_mean().transpose();
    let centered = DMatrix::from_fn(n, d, |i, j| x[(i, j)] - mean[j]);
    let cov = (centered.transpose() * &centered) / (n as f64 - 1.0);
    Ok(ActivationStats { mean, cov, count: n })
}

pub fn activation_stats(images: &[ColorPhoto], extractor: &dyn FeatureExtractor) -> Result<ActivationStats> {
    if images.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "activation statistics need at least 2 images, got {}",
            images.len()
        )));
    }
    activation_stats_from_vectors(&extractor.extract(images)?)
}

/// Negative eigenvalues down to `−NEG_EIGEN_TOL·max(1, λ_max)` are rounding
/// noise and clip to zero; anything lower is an error.
pub const NEG_EIGEN_TOL: f64 = 1e-6;

fn clipped_eigen(m: &DMatrix<f64>, what: &str) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let sym = (m + m.transpose()) * 0.5;
    let mut eig = SymmetricEigen::new(sym);
    let scale = eig.eigenvalues.iter().fold(1.0f64, |a, &v| a.max(v.abs()));
    for v in eig.eigenvalues.iter_mut() {
        if !v.is_finite() {
            return Err(Error::Numerical(format!("{what}: non-finite eigenvalue")));
        }
        if *v < 0.0 {
            if *v < -NEG_EIGEN_TOL * scale {
                return Err(Error::Numerical(format!("{what}: eigenvalue {v} is not positive semidefinite")));
            }
            *v = 0.0;
        }
    }
    Ok(eig)
}

/// `‖μa − μb‖² + Tr(Σa + Σb − 2(Σa Σb)^{1/2})`. The trace of the product root
/// is taken as `Tr((Σa^{1/2} Σb Σa^{1/2})^{1/2})`, which keeps every
/// decomposition symmetric.
pub fn frechet_distance(a: &ActivationStats, b: &ActivationStats) -> Result<f64> {
    if a.dim() != b.dim() || a.cov.shape() != b.cov.shape() {
        return Err(Error::Shape(format!("activation dims {} vs {}", a.dim(), b.dim())));
    }
    let diff = (&a.mean - &b.mean).norm_squared();
    let ea = clipped_eigen(&a.cov, "Σa")?;
    let root_a = &ea.eigenvectors
        * DMatrix::from_diagonal(&ea.eigenvalues.map(f64::sqrt))
        * ea.eigenvectors.transpose();
    let inner = &root_a * &b.cov * &root_a;
    let ei = clipped_eigen(&inner, "Σa^½ Σb Σa^½")?;
    let tr_root: f64 = ei.eigenvalues.iter().map(|v| v.sqrt()).sum();
    let d = diff + a.cov.trace() + b.cov.trace() - 2.0 * tr_root;
    if !d.is_finite() {
        return Err(Error::Numerical(format!("Fréchet distance is {d}")));
    }
    // rounding can leave a tiny negative value for identical inputs
    Ok(d.max(0.0))
}

pub fn compute_fid(real: &[ColorPhoto], fake: &[ColorPhoto], extractor: &dyn FeatureExtractor) -> Result<f64> {
    frechet_distance(&activation_stats(real, extractor)?, &activation_stats(fake, extractor)?)
}

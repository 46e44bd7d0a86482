//! sRGB → CIE Lab (D65), written with tensor ops so losses can
//! differentiate through it.

use candle_core::{DType, Tensor};

use crate::error::{Error, Result};
use crate::sketchdata::ColorPhoto;

/// Linear sRGB → XYZ for the D65 illuminant.
pub const SRGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];

/// Reference white as the image of sRGB white, so neutral inputs map to
/// `a = b = 0` without rounding drift.
pub fn white_point() -> [f64; 3] {
    SRGB_TO_XYZ.map(|row| row.iter().sum())
}

const DELTA: f64 = 6.0 / 29.0;
// keeps fractional powers away from 0 where their derivative is unbounded
const POW_FLOOR: f64 = 1e-12;

fn srgb_to_linear(c: &Tensor) -> Result<Tensor> {
    let low = (c / 12.92)?;
    let high = c.affine(1.0 / 1.055, 0.055 / 1.055)?.maximum(POW_FLOOR)?.powf(2.4)?;
    let mask = c.gt(0.04045)?;
    Ok(mask.where_cond(&high, &low)?)
}

fn lab_f(t: &Tensor) -> Result<Tensor> {
    let cube = t.maximum(POW_FLOOR)?.powf(1.0 / 3.0)?;
    let linear = t.affine(1.0 / (3.0 * DELTA * DELTA), 4.0 / 29.0)?;
    let mask = t.gt(DELTA.powi(3))?;
    Ok(mask.where_cond(&cube, &linear)?)
}

/// `(N,3,H,W)` sRGB in `[0,1]` → `(N,3,H,W)` with channels `L, a, b`.
pub fn rgb_to_lab_tensor(rgb: &Tensor) -> Result<Tensor> {
    let (_, c, _, _) = rgb.dims4()?;
    if c != 3 {
        return Err(Error::Shape(format!("Lab conversion needs 3 channels, got {c}")));
    }
    let lin: Vec<Tensor> = (0..3)
        .map(|i| srgb_to_linear(&rgb.narrow(1, i, 1)?))
        .collect::<Result<_>>()?;
    let white = white_point();
    let mut f = Vec::with_capacity(3);
    for (row, wn) in SRGB_TO_XYZ.iter().zip(white) {
        let xyz = ((((&lin[0] * row[0])? + (&lin[1] * row[1])?)? + (&lin[2] * row[2])?)? / wn)?;
        f.push(lab_f(&xyz)?);
    }
    let l = f[1].affine(116.0, -16.0)?;
    let a = ((&f[0] - &f[1])? * 500.0)?;
    let b = ((&f[1] - &f[2])? * 200.0)?;
    Ok(Tensor::cat(&[l, a, b], 1)?)
}

/// Channel-major `3×H×W` Lab values of a photo, computed in double precision.
pub fn rgb_to_lab(photo: &ColorPhoto) -> Result<Vec<f64>> {
    let x = photo.to_tensor(&candle_core::Device::Cpu, DType::F64)?;
    Ok(rgb_to_lab_tensor(&x)?.flatten_all()?.to_vec1()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lab_of(rgb: [f32; 3]) -> [f64; 3] {
        let v = rgb_to_lab(&ColorPhoto::filled(1, 1, rgb)).unwrap();
        [v[0], v[1], v[2]]
    }

    #[test]
    fn anchor_colors() {
        let w = lab_of([1.0, 1.0, 1.0]);
        assert!((w[0] - 100.0).abs() < 0.01 && w[1].abs() < 0.01 && w[2].abs() < 0.01);
        assert!(lab_of([0.0, 0.0, 0.0])[0].abs() < 1e-9);
        let g = lab_of([0.5, 0.5, 0.5]);
        assert!((g[0] - 53.389).abs() < 0.01);
    }

    #[test]
    fn grays_are_neutral() {
        for i in 0..=20 {
            let v = i as f32 / 20.0;
            let [_, a, b] = lab_of([v, v, v]);
            assert!(a.abs() < 0.01 && b.abs() < 0.01, "{v}: {a} {b}");
        }
    }

    #[test]
    fn saturated_red() {
        let [l, a, b] = lab_of([1.0, 0.0, 0.0]);
        assert!((l - 53.24).abs() < 0.05 && (a - 80.09).abs() < 0.1 && (b - 67.20).abs() < 0.1);
    }
}

//! Unpaired sketch/photo data: rasters, dataset loading, color conversion,
//! noise-sketch composition and stroke-order rendering.

mod dataset;
mod images;
mod noise;
mod strokes;

pub use dataset::{load_dataset, load_photo_dir, load_sketch_dir, UnpairedDataset};
pub use images::{ColorPhoto, GrayscalePhoto, SketchImage, INK_THRESHOLD};
pub use noise::{
    build_noise_mask_pool, compose_complex, compose_distractive, sample_noise_sketch,
    MaskProvenance, NoiseMaskPool, NoiseSample, NoiseSampler, NoiseTag, DEFAULT_CROP_SIZE,
    DEFAULT_DENSITY_THRESHOLD, DEFAULT_PATCH_SIZE, DEFAULT_POOL_SIZE,
};
pub use strokes::{truncate_strokes, StrokeSequence};

/// BT.601 luma weights for R, G, B.
pub const LUMA_WEIGHTS: [f32; 3] = [0.299, 0.587, 0.114];

/// `Y = 0.299 R + 0.587 G + 0.114 B` per pixel.
pub fn to_grayscale(photo: &ColorPhoto) -> GrayscalePhoto {
    let (r, g, b) = (photo.channel(0), photo.channel(1), photo.channel(2));
    let data = r
        .iter()
        .zip(g)
        .zip(b)
        .map(|((&r, &g), &b)| {
            if r == g && g == b {
                // weights sum to 1 only up to rounding; keep equal channels exact
                r
            } else {
                (LUMA_WEIGHTS[0] * r + LUMA_WEIGHTS[1] * g + LUMA_WEIGHTS[2] * b).clamp(0.0, 1.0)
            }
        })
        .collect();
    GrayscalePhoto::new(photo.width(), photo.height(), data)
        .expect("luma of in-range channels stays in range")
}

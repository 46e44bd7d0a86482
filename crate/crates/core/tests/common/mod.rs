//! Procedural stand-in data: outline sketches of ellipses and shaded,
//! coloured ellipse photos on white. Sketches and photos are unpaired.
#![allow(dead_code)]

pub mod grad;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sketch2photo::pipeline::TrainingConfig;
use sketch2photo::sketchdata::{to_grayscale, ColorPhoto, StrokeSequence, UnpairedDataset};

pub struct Ellipse {
    pub cx: f32,
    pub cy: f32,
    pub rx: f32,
    pub ry: f32,
}

pub fn random_ellipse(rng: &mut impl Rng, size: usize) -> Ellipse {
    let s = size as f32;
    Ellipse {
        cx: s * rng.random_range(0.4..0.6),
        cy: s * rng.random_range(0.4..0.6),
        rx: s * rng.random_range(0.2..0.35),
        ry: s * rng.random_range(0.15..0.3),
    }
}

/// Outline as four arcs plus a horizontal stroke through the middle, in
/// drawing order.
pub fn ellipse_strokes(e: &Ellipse, size: usize) -> StrokeSequence {
    let mut strokes = Vec::new();
    for q in 0..4 {
        let arc: Vec<(f32, f32)> = (0..=12)
            .map(|i| {
                let t = (q as f32 + i as f32 / 12.0) * std::f32::consts::FRAC_PI_2;
                (e.cx + e.rx * t.cos(), e.cy + e.ry * t.sin())
            })
            .collect();
        strokes.push(arc);
    }
    strokes.push(vec![(e.cx - e.rx * 0.6, e.cy), (e.cx + e.rx * 0.6, e.cy)]);
    StrokeSequence::new(strokes, size, size)
}

pub fn ellipse_photo(e: &Ellipse, rgb: [f32; 3], size: usize) -> ColorPhoto {
    let plane = size * size;
    let mut data = vec![1.0f32; 3 * plane];
    for y in 0..size {
        for x in 0..size {
            let (dx, dy) = ((x as f32 - e.cx) / e.rx, (y as f32 - e.cy) / e.ry);
            if dx * dx + dy * dy <= 1.0 {
                let shade = 0.7 + 0.3 * (1.0 - (y as f32 - (e.cy - e.ry)) / (2.0 * e.ry)).clamp(0.0, 1.0);
                for c in 0..3 {
                    data[c * plane + y * size + x] = (rgb[c] * shade).clamp(0.0, 1.0);
                }
            }
        }
    }
    ColorPhoto::new(size, size, data).expect("values in range")
}

pub fn synthetic_dataset(n: usize, size: usize, seed: u64) -> UnpairedDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ds = UnpairedDataset::default();
    for i in 0..n {
        let e = random_ellipse(&mut rng, size);
        let seq = ellipse_strokes(&e, size);
        ds.sketches.push(seq.rasterize());
        ds.sketch_names.push(format!("s{i:03}.png"));
        ds.sketch_strokes.push(Some(seq));
        ds.sketch_sources.push("synthetic".into());
    }
    for i in 0..n {
        let e = random_ellipse(&mut rng, size);
        let rgb = [rng.random_range(0.1..0.9), rng.random_range(0.1..0.9), rng.random_range(0.1..0.9)];
        let photo = ellipse_photo(&e, rgb, size);
        ds.grayscales.push(to_grayscale(&photo));
        ds.photos.push(photo);
        ds.photo_names.push(format!("p{i:03}.png"));
        ds.photo_sources.push("synthetic".into());
    }
    ds
}

/// Write `ds` as `root/sketch/*.png` (with stroke sidecars) and `root/photo/*.png`.
pub fn write_dataset(ds: &UnpairedDataset, root: &Path) {
    std::fs::create_dir_all(root.join("sketch")).unwrap();
    std::fs::create_dir_all(root.join("photo")).unwrap();
    for (i, s) in ds.sketches.iter().enumerate() {
        let name = &ds.sketch_names[i];
        s.save_png(root.join("sketch").join(name)).unwrap();
        if let Some(seq) = &ds.sketch_strokes[i] {
            let stem = name.trim_end_matches(".png");
            std::fs::write(root.join("sketch").join(format!("{stem}.strokes.txt")), seq.to_text()).unwrap();
        }
    }
    for (i, p) in ds.photos.iter().enumerate() {
        p.save_png(root.join("photo").join(&ds.photo_names[i])).unwrap();
    }
}

/// Reduced-width recipe for CPU runs: published loss weights and schedule shape,
/// small networks and images.
pub fn desk_config(image_size: usize) -> TrainingConfig {
    let mut c = TrainingConfig::default();
    c.data.image_size = image_size;
    c.data.noise_crop_size = 16;
    c.data.noise_density_threshold = 0.1;
    c.data.noise_pool_size = 64;
    c.shape.patch_size = (image_size * 3 / 8).max(4);
    c.shape.base_channels = 8;
    c.shape.residual_blocks = 3;
    c.shape.disc_channels = 8;
    c.content.base_channels = 4;
    c.content.residual_blocks = 4;
    c.content.disc_channels = 8;
    c
}

/// Freshly initialised shape and content checkpoints (tiny widths), for
/// inference-path tests that do not care about output quality.
pub fn tiny_checkpoints(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    use candle_core::{DType, Device};
    use sketch2photo::content::{ContentNetConfig, ContentNetworks};
    use sketch2photo::pipeline::{Checkpoint, Stage};
    use sketch2photo::shape::{ShapeNetConfig, ShapeNetworks};

    let shape = ShapeNetworks::new(
        ShapeNetConfig { base_channels: 4, residual_blocks: 1, disc_channels: 4, attention: true },
        3,
        &Device::Cpu,
        DType::F32,
    )
    .unwrap();
    let content = ContentNetworks::new(
        ContentNetConfig { base_channels: 2, residual_blocks: 1, disc_channels: 4 },
        4,
        &Device::Cpu,
        DType::F32,
    )
    .unwrap();
    let (s, c) = (dir.join("shape.ckpt"), dir.join("content.ckpt"));
    Checkpoint::capture(Stage::Shape, 0, 0, &shape.params, serde_json::to_value(shape.config).unwrap(), String::new(), None)
        .unwrap()
        .save(&s)
        .unwrap();
    Checkpoint::capture(Stage::Content, 0, 0, &content.params, serde_json::to_value(content.config).unwrap(), String::new(), None)
        .unwrap()
        .save(&c)
        .unwrap();
    (s, c)
}

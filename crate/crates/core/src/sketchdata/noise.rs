//! Noise-sketch composition: a pool of dense-stroke masks for "complex"
//! sketches and patch pasting from other sketches for "distractive" ones.
//! All compositing is pixel-wise `min`, so it only ever adds ink.

use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::images::SketchImage;
use crate::archive;
use crate::error::{Error, Result};

pub const DEFAULT_CROP_SIZE: usize = 32;
pub const DEFAULT_DENSITY_THRESHOLD: f64 = 0.15;
pub const DEFAULT_POOL_SIZE: usize = 256;
pub const DEFAULT_PATCH_SIZE: usize = 50;

const POOL_MAGIC: &[u8; 8] = b"S2PPOOL\0";
const POOL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskProvenance {
    pub sketch_index: usize,
    pub x: usize,
    pub y: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseMaskPool {
    pub masks: Vec<SketchImage>,
    pub provenance: Vec<MaskProvenance>,
    pub seed: u64,
    pub density_threshold: f64,
    pub crop_size: usize,
    /// Set when the corpus held fewer qualifying crops than requested.
    pub underfilled: bool,
}

#[derive(Serialize, Deserialize)]
struct PoolHeader {
    seed: u64,
    density_threshold: f64,
    crop_size: usize,
    underfilled: bool,
    provenance: Vec<MaskProvenance>,
}

impl NoiseMaskPool {
    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = PoolHeader {
            seed: self.seed,
            density_threshold: self.density_threshold,
            crop_size: self.crop_size,
            underfilled: self.underfilled,
            provenance: self.provenance.clone(),
        };
        let pixels: Vec<f32> = self.masks.iter().flat_map(|m| m.pixels().iter().copied()).collect();
        archive::write_archive(
            POOL_MAGIC,
            POOL_VERSION,
            &serde_json::to_value(header)?,
            &archive::f32s_to_bytes(&pixels),
        )
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (header, payload) = archive::read_archive(POOL_MAGIC, POOL_VERSION, bytes)?;
        let header: PoolHeader = serde_json::from_value(header)?;
        let pixels = archive::bytes_to_f32s(&payload)?;
        let side = header.crop_size;
        if side == 0 || pixels.len() != header.provenance.len() * side * side {
            return Err(Error::Integrity("mask payload does not match header".into()));
        }
        let masks = pixels
            .chunks_exact(side * side)
            .map(|c| SketchImage::new(side, side, c.to_vec()))
            .collect::<Result<_>>()?;
        Ok(Self {
            masks,
            provenance: header.provenance,
            seed: header.seed,
            density_threshold: header.density_threshold,
            crop_size: side,
            underfilled: header.underfilled,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// Summed-area table of ink indicators, `(w+1)×(h+1)`.
fn ink_integral(s: &SketchImage) -> Vec<u32> {
    let (w, h) = (s.width(), s.height());
    let mut table = vec![0u32; (w + 1) * (h + 1)];
    for y in 0..h {
        let mut row = 0u32;
        for x in 0..w {
            row += u32::from(s.get(x, y) < super::INK_THRESHOLD);
            table[(y + 1) * (w + 1) + x + 1] = table[y * (w + 1) + x + 1] + row;
        }
    }
    table
}

/// Scan every sketch with a `crop_size` window (stride `crop_size/4`), keep
/// windows whose ink density reaches `density_threshold`, then draw
/// `pool_size` of them with a seeded shuffle.
pub fn build_noise_mask_pool(
    sketches: &[SketchImage],
    crop_size: usize,
    density_threshold: f64,
    pool_size: usize,
    seed: u64,
) -> Result<NoiseMaskPool> {
    if pool_size == 0 {
        return Err(Error::InvalidInput("pool_size must be at least 1".into()));
    }
    if !(density_threshold > 0.0 && density_threshold < 1.0) {
        return Err(Error::InvalidInput(format!(
            "density_threshold {density_threshold} must lie in (0,1)"
        )));
    }
    if crop_size == 0 {
        return Err(Error::InvalidInput("crop_size must be positive".into()));
    }
    let stride = (crop_size / 4).max(1);
    let area = (crop_size * crop_size) as f64;

    let mut candidates = Vec::new();
    for (idx, s) in sketches.iter().enumerate() {
        if crop_size > s.width() || crop_size > s.height() {
            return Err(Error::InvalidInput(format!(
                "crop_size {crop_size} exceeds sketch {idx} size {}x{}",
                s.width(),
                s.height()
            )));
        }
        let table = ink_integral(s);
        let stride_w = s.width() + 1;
        let at = |x: usize, y: usize| table[y * stride_w + x] as i64;
        for y in (0..=s.height() - crop_size).step_by(stride) {
            for x in (0..=s.width() - crop_size).step_by(stride) {
                let (x1, y1) = (x + crop_size, y + crop_size);
                let ink = at(x1, y1) - at(x, y1) - at(x1, y) + at(x, y);
                if ink as f64 / area >= density_threshold {
                    candidates.push(MaskProvenance { sketch_index: idx, x, y });
                }
            }
        }
    }
    if candidates.is_empty() {
        return Err(Error::EmptyPool { threshold: density_threshold });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    candidates.shuffle(&mut rng);
    let underfilled = candidates.len() < pool_size;
    if underfilled {
        warn!(
            "noise mask pool underfilled: {} qualifying crops, {pool_size} requested",
            candidates.len()
        );
    }
    candidates.truncate(pool_size);

    let masks = candidates
        .iter()
        .map(|p| sketches[p.sketch_index].crop(p.x, p.y, crop_size, crop_size))
        .collect::<Result<_>>()?;
    Ok(NoiseMaskPool {
        masks,
        provenance: candidates,
        seed,
        density_threshold,
        crop_size,
        underfilled,
    })
}

/// Min-composite `src` (window at `src_xy`, size `w`×`h`) onto `dst` at `dst_xy`.
fn min_blit(
    dst: &SketchImage,
    src: &SketchImage,
    src_xy: (usize, usize),
    dst_xy: (usize, usize),
    w: usize,
    h: usize,
) -> Result<SketchImage> {
    let (sx, sy) = src_xy;
    let (dx, dy) = dst_xy;
    if sx + w > src.width() || sy + h > src.height() {
        return Err(Error::OutOfBounds(format!(
            "source window {w}x{h} at ({sx},{sy}) exceeds {}x{}",
            src.width(),
            src.height()
        )));
    }
    if dx + w > dst.width() || dy + h > dst.height() {
        return Err(Error::OutOfBounds(format!(
            "target window {w}x{h} at ({dx},{dy}) exceeds {}x{}",
            dst.width(),
            dst.height()
        )));
    }
    let mut out = dst.clone();
    for y in 0..h {
        for x in 0..w {
            let v = dst.get(dx + x, dy + y).min(src.get(sx + x, sy + y));
            out.set(dx + x, dy + y, v);
        }
    }
    Ok(out)
}

/// Insert a dense-stroke mask at `location` (top-left corner).
pub fn compose_complex(
    sketch: &SketchImage,
    mask: &SketchImage,
    location: (usize, usize),
) -> Result<SketchImage> {
    min_blit(sketch, mask, (0, 0), location, mask.width(), mask.height())
}

/// Paste a `patch_size`×`patch_size` window of `donor` at `src` onto `sketch` at `dst`.
pub fn compose_distractive(
    sketch: &SketchImage,
    donor: &SketchImage,
    patch_size: usize,
    src: (usize, usize),
    dst: (usize, usize),
) -> Result<SketchImage> {
    min_blit(sketch, donor, src, dst, patch_size, patch_size)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseTag {
    Clean,
    Complex,
    Distractive,
}

impl NoiseTag {
    pub fn is_clean(self) -> bool {
        self == NoiseTag::Clean
    }
}

/// A possibly noise-composed sketch together with its clean original.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSample {
    pub sketch: SketchImage,
    pub clean: SketchImage,
    pub tag: NoiseTag,
    /// Placement of the inserted pattern, when one was inserted.
    pub location: Option<(usize, usize)>,
    /// Set when the drawn composition could not be made and the clean sketch
    /// was passed through instead.
    pub fallback: bool,
}

/// Uniform draw over `[0, n)` that is identical on 32- and 64-bit targets.
fn below(rng: &mut impl Rng, n: usize) -> usize {
    debug_assert!(n > 0 && n <= u32::MAX as usize);
    rng.random_range(0..n as u32) as usize
}

pub struct NoiseSampler<'a> {
    pub pool: &'a NoiseMaskPool,
    pub donors: &'a [SketchImage],
    pub p_complex: f64,
    pub p_distractive: f64,
    pub patch_size: usize,
}

impl<'a> NoiseSampler<'a> {
    pub fn new(
        pool: &'a NoiseMaskPool,
        donors: &'a [SketchImage],
        p_complex: f64,
        p_distractive: f64,
    ) -> Result<Self> {
        let valid = |p: f64| (0.0..=1.0).contains(&p);
        if !valid(p_complex) || !valid(p_distractive) || p_complex + p_distractive > 1.0 + 1e-12 {
            return Err(Error::InvalidInput(format!(
                "noise probabilities ({p_complex}, {p_distractive}) must be in [0,1] and sum to at most 1"
            )));
        }
        Ok(Self { pool, donors, p_complex, p_distractive, patch_size: DEFAULT_PATCH_SIZE })
    }

    pub fn with_patch_size(mut self, patch_size: usize) -> Self {
        self.patch_size = patch_size;
        self
    }

    /// `self_index`, when given, is the position of `sketch` in `donors` so a
    /// distractive patch always comes from a different sketch.
    pub fn sample(
        &self,
        sketch: &SketchImage,
        self_index: Option<usize>,
        rng: &mut impl Rng,
    ) -> Result<NoiseSample> {
        let clean = |fallback| NoiseSample {
            sketch: sketch.clone(),
            clean: sketch.clone(),
            tag: NoiseTag::Clean,
            location: None,
            fallback,
        };
        let u: f64 = rng.random();
        if u < self.p_complex {
            if self.pool.is_empty() {
                warn!("complex composition drawn with an empty mask pool; passing clean sketch");
                return Ok(clean(true));
            }
            let mask = &self.pool.masks[below(rng, self.pool.len())];
            if mask.width() > sketch.width() || mask.height() > sketch.height() {
                return Err(Error::OutOfBounds("noise mask larger than sketch".into()));
            }
            let x = below(rng, sketch.width() - mask.width() + 1);
            let y = below(rng, sketch.height() - mask.height() + 1);
            Ok(NoiseSample {
                sketch: compose_complex(sketch, mask, (x, y))?,
                clean: sketch.clone(),
                tag: NoiseTag::Complex,
                location: Some((x, y)),
                fallback: false,
            })
        } else if u < self.p_complex + self.p_distractive {
            let choices = self.donors.len() - usize::from(self_index.is_some_and(|i| i < self.donors.len()));
            if choices == 0 {
                warn!("distractive composition drawn without a donor sketch; passing clean sketch");
                return Ok(clean(true));
            }
            let mut d = below(rng, choices);
            if let Some(i) = self_index {
                if d >= i {
                    d += 1;
                }
            }
            let donor = &self.donors[d];
            let p = self.patch_size;
            if p > donor.width() || p > donor.height() || p > sketch.width() || p > sketch.height() {
                return Err(Error::OutOfBounds(format!("patch size {p} exceeds image size")));
            }
            let src = (below(rng, donor.width() - p + 1), below(rng, donor.height() - p + 1));
            let dst = (below(rng, sketch.width() - p + 1), below(rng, sketch.height() - p + 1));
            Ok(NoiseSample {
                sketch: compose_distractive(sketch, donor, p, src, dst)?,
                clean: sketch.clone(),
                tag: NoiseTag::Distractive,
                location: Some(dst),
                fallback: false,
            })
        } else {
            Ok(clean(false))
        }
    }
}

/// One draw of the noise-composition policy: complex with probability
/// `p_complex`, distractive with `p_distractive`, otherwise clean.
pub fn sample_noise_sketch(
    sketch: &SketchImage,
    pool: &NoiseMaskPool,
    donors: &[SketchImage],
    p_complex: f64,
    p_distractive: f64,
    rng: &mut impl Rng,
) -> Result<NoiseSample> {
    NoiseSampler::new(pool, donors, p_complex, p_distractive)?.sample(sketch, None, rng)
}

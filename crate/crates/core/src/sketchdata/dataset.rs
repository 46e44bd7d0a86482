use std::path::{Path, PathBuf};

use log::info;

use super::images::{ColorPhoto, GrayscalePhoto, SketchImage};
use super::strokes::StrokeSequence;
use super::to_grayscale;
use crate::error::{Error, Result};

/// Unpaired sketches and photos of one semantic category. No pairing between
/// the two sides is stored.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UnpairedDataset {
    pub sketches: Vec<SketchImage>,
    pub sketch_names: Vec<String>,
    pub sketch_strokes: Vec<Option<StrokeSequence>>,
    pub photos: Vec<ColorPhoto>,
    pub photo_names: Vec<String>,
    pub grayscales: Vec<GrayscalePhoto>,
    pub sketch_sources: Vec<String>,
    pub photo_sources: Vec<String>,
}

impl UnpairedDataset {
    pub fn num_sketches(&self) -> usize {
        self.sketches.len()
    }

    pub fn num_photos(&self) -> usize {
        self.photos.len()
    }

    /// Append another dataset's items, keeping their source tags.
    pub fn merge(&mut self, other: UnpairedDataset) {
        self.sketches.extend(other.sketches);
        self.sketch_names.extend(other.sketch_names);
        self.sketch_strokes.extend(other.sketch_strokes);
        self.sketch_sources.extend(other.sketch_sources);
        self.photos.extend(other.photos);
        self.photo_names.extend(other.photo_names);
        self.grayscales.extend(other.grayscales);
        self.photo_sources.extend(other.photo_sources);
    }
}

/// PNG files of `dir`, sorted by file name.
fn list_pngs(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(Error::Config(format!("missing directory {}", dir.display())));
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("png"))
        })
        .collect();
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

fn decode(path: &Path) -> Result<image::DynamicImage> {
    let bytes = std::fs::read(path)?;
    image::load_from_memory(&bytes)
        .map_err(|e| Error::Decode { path: path.to_path_buf(), reason: e.to_string() })
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Sidecar `name.strokes.txt` next to `name.png`.
fn stroke_sidecar(png: &Path) -> PathBuf {
    let stem = png.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    png.with_file_name(format!("{stem}.strokes.txt"))
}

/// Sketches of `dir` with their optional stroke sidecars, in file-name order.
pub fn load_sketch_dir(
    dir: &Path,
    image_size: usize,
) -> Result<Vec<(String, SketchImage, Option<StrokeSequence>)>> {
    let mut out = Vec::new();
    for path in list_pngs(dir)? {
        let img = decode(&path)?;
        let (sw, sh) = (img.width() as usize, img.height() as usize);
        let sketch = SketchImage::from_dynamic(&img).normalized(image_size);
        if !sketch.is_background_majority() {
            return Err(Error::Decode {
                path,
                reason: "not a dark-on-white sketch (mean intensity <= 0.5)".into(),
            });
        }
        let sidecar = stroke_sidecar(&path);
        let strokes = if sidecar.is_file() {
            let text = std::fs::read_to_string(&sidecar)?;
            let seq = StrokeSequence::parse(&text, sw, sh)
                .map_err(|e| Error::Decode { path: sidecar.clone(), reason: e.to_string() })?;
            Some(seq.scaled_to(image_size))
        } else {
            None
        };
        out.push((file_name(&path), sketch, strokes));
    }
    Ok(out)
}

/// Color photos of `dir`, in file-name order.
pub fn load_photo_dir(dir: &Path, image_size: usize) -> Result<Vec<(String, ColorPhoto)>> {
    list_pngs(dir)?
        .into_iter()
        .map(|path| {
            let img = decode(&path)?;
            Ok((file_name(&path), ColorPhoto::from_dynamic(&img).normalized(image_size)))
        })
        .collect()
}

/// Load `root/sketch/*.png` and `root/photo/*.png`, resized to
/// `image_size`×`image_size`. Fails on the first undecodable file.
pub fn load_dataset(root: impl AsRef<Path>, image_size: usize) -> Result<UnpairedDataset> {
    let root = root.as_ref();
    if image_size == 0 {
        return Err(Error::Config("image_size must be positive".into()));
    }
    let source = root.display().to_string();
    let sketches = load_sketch_dir(&root.join("sketch"), image_size)?;
    let photos = load_photo_dir(&root.join("photo"), image_size)?;

    let mut ds = UnpairedDataset::default();
    for (name, sketch, strokes) in sketches {
        ds.sketch_names.push(name);
        ds.sketches.push(sketch);
        ds.sketch_strokes.push(strokes);
        ds.sketch_sources.push(source.clone());
    }
    for (name, photo) in photos {
        ds.grayscales.push(to_grayscale(&photo));
        ds.photo_names.push(name);
        ds.photos.push(photo);
        ds.photo_sources.push(source.clone());
    }
    info!(
        "loaded {} sketches and {} photos from {}",
        ds.num_sketches(),
        ds.num_photos(),
        root.display()
    );
    Ok(ds)
}

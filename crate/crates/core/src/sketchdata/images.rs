//! Raster types for the three image domains: sketches, grayscale photos and
//! color photos. All pixel values live in `[0, 1]`; sketches are dark ink on
//! a white (1.0) background.

use std::io::Cursor;
use std::path::Path;

use candle_core::{DType, Device, Tensor};
use image::imageops::FilterType;
use image::{DynamicImage, ImageBuffer, ImageFormat, Luma, Rgb};

use crate::error::{Error, Result};

/// Pixels darker than this count as ink.
pub const INK_THRESHOLD: f32 = 0.5;

fn check_range(data: &[f32], what: &str) -> Result<()> {
    match data.iter().position(|v| !(0.0..=1.0).contains(v)) {
        Some(i) => Err(Error::InvalidInput(format!(
            "{what} pixel {i} = {} outside [0,1]",
            data[i]
        ))),
        None => Ok(()),
    }
}

macro_rules! single_channel_raster {
    ($name:ident, $what:literal) => {
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name {
            width: usize,
            height: usize,
            data: Vec<f32>,
        }

        impl $name {
            /// Row-major pixels, validated to lie in `[0,1]`.
            pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
                if width == 0 || height == 0 || data.len() != width * height {
                    return Err(Error::Shape(format!(
                        "{} expects {}x{} = {} pixels, got {}",
                        $what,
                        width,
                        height,
                        width * height,
                        data.len()
                    )));
                }
                check_range(&data, $what)?;
                Ok(Self { width, height, data })
            }

            pub fn filled(width: usize, height: usize, value: f32) -> Self {
                Self { width, height, data: vec![value.clamp(0.0, 1.0); width * height] }
            }

            pub fn width(&self) -> usize {
                self.width
            }

            pub fn height(&self) -> usize {
                self.height
            }

            pub fn pixels(&self) -> &[f32] {
                &self.data
            }

            pub fn into_pixels(self) -> Vec<f32> {
                self.data
            }

            #[inline]
            pub fn get(&self, x: usize, y: usize) -> f32 {
                self.data[y * self.width + x]
            }

            pub fn mean(&self) -> f32 {
                self.data.iter().sum::<f32>() / self.data.len() as f32
            }

            /// `(1, 1, H, W)` tensor in `[0,1]`.
            pub fn to_tensor(&self, device: &Device, dtype: DType) -> Result<Tensor> {
                Ok(Tensor::from_slice(&self.data, (1, 1, self.height, self.width), device)?
                    .to_dtype(dtype)?)
            }

            /// Accepts `(H, W)`, `(1, H, W)` or `(1, 1, H, W)`; values are clamped to `[0,1]`.
            pub fn from_tensor(t: &Tensor) -> Result<Self> {
                let dims = t.dims();
                let (h, w) = match *dims {
                    [h, w] | [1, h, w] | [1, 1, h, w] => (h, w),
                    _ => {
                        return Err(Error::Shape(format!(
                            "{} tensor must be single-channel, got {:?}",
                            $what, dims
                        )))
                    }
                };
                let data = t
                    .to_dtype(DType::F32)?
                    .flatten_all()?
                    .to_vec1::<f32>()?
                    .into_iter()
                    .map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) })
                    .collect();
                Ok(Self { width: w, height: h, data })
            }

            pub fn to_luma(&self) -> ImageBuffer<Luma<f32>, Vec<f32>> {
                ImageBuffer::from_raw(self.width as u32, self.height as u32, self.data.clone())
                    .expect("buffer sized by construction")
            }

            pub fn from_luma(img: &ImageBuffer<Luma<f32>, Vec<f32>>) -> Self {
                let data = img.as_raw().iter().map(|v| v.clamp(0.0, 1.0)).collect();
                Self { width: img.width() as usize, height: img.height() as usize, data }
            }

            /// Resize to `size`×`size`; a no-op when already that size.
            pub fn resized(&self, size: usize) -> Self {
                if self.width == size && self.height == size {
                    return self.clone();
                }
                let out = image::imageops::resize(
                    &self.to_luma(),
                    size as u32,
                    size as u32,
                    FilterType::Triangle,
                );
                Self::from_luma(&out)
            }

            pub fn to_png_bytes(&self) -> Result<Vec<u8>> {
                let img = DynamicImage::ImageLuma8(ImageBuffer::from_fn(
                    self.width as u32,
                    self.height as u32,
                    |x, y| Luma([quantize(self.get(x as usize, y as usize))]),
                ));
                encode_png(&img)
            }

            pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
                std::fs::write(path, self.to_png_bytes()?)?;
                Ok(())
            }

            pub fn from_dynamic(img: &DynamicImage) -> Self {
                Self::from_luma(&img.to_luma32f())
            }

            pub fn from_png_bytes(bytes: &[u8]) -> Result<Self> {
                Ok(Self::from_dynamic(&image::load_from_memory(bytes)?))
            }
        }
    };
}

single_channel_raster!(SketchImage, "sketch");
single_channel_raster!(GrayscalePhoto, "grayscale photo");

impl SketchImage {
    #[inline]
    pub(crate) fn set(&mut self, x: usize, y: usize, v: f32) {
        self.data[y * self.width + x] = v.clamp(0.0, 1.0);
    }

    /// All-white canvas.
    pub fn blank(width: usize, height: usize) -> Self {
        Self::filled(width, height, 1.0)
    }

    pub fn ink_count(&self) -> usize {
        self.data.iter().filter(|&&v| v < INK_THRESHOLD).count()
    }

    /// Fraction of pixels darker than [`INK_THRESHOLD`].
    pub fn ink_density(&self) -> f64 {
        self.ink_count() as f64 / self.data.len() as f64
    }

    /// Free-hand sketches are mostly background.
    pub fn is_background_majority(&self) -> bool {
        self.mean() > 0.5
    }

    /// Copy of the `w`×`h` window at `(x, y)`.
    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Result<Self> {
        if x + w > self.width || y + h > self.height || w == 0 || h == 0 {
            return Err(Error::OutOfBounds(format!(
                "crop {w}x{h} at ({x},{y}) exceeds {}x{}",
                self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(w * h);
        for row in y..y + h {
            data.extend_from_slice(&self.data[row * self.width + x..row * self.width + x + w]);
        }
        Ok(Self { width: w, height: h, data })
    }

    /// Pad to a square with white, then resize to `size`×`size`.
    pub fn normalized(&self, size: usize) -> Self {
        let side = self.width.max(self.height);
        if side == self.width && side == self.height {
            return self.resized(size);
        }
        let mut square = Self::blank(side, side);
        let (ox, oy) = ((side - self.width) / 2, (side - self.height) / 2);
        for y in 0..self.height {
            for x in 0..self.width {
                square.set(ox + x, oy + y, self.get(x, y));
            }
        }
        square.resized(size)
    }
}

/// Three-channel RGB photo stored channel-major (`3×H×W`).
#[derive(Debug, Clone, PartialEq)]
pub struct ColorPhoto {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl ColorPhoto {
    pub const CHANNELS: usize = 3;

    /// Channel-major pixels (`R` plane, then `G`, then `B`).
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != 3 * width * height {
            return Err(Error::Shape(format!(
                "color photo expects 3x{width}x{height} = {} values, got {}",
                3 * width * height,
                data.len()
            )));
        }
        check_range(&data, "color photo")?;
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, rgb: [f32; 3]) -> Self {
        let plane = width * height;
        let mut data = Vec::with_capacity(3 * plane);
        for c in rgb {
            data.extend(std::iter::repeat_n(c.clamp(0.0, 1.0), plane));
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f32] {
        &self.data
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let plane = self.width * self.height;
        &self.data[c * plane..(c + 1) * plane]
    }

    #[inline]
    pub fn rgb(&self, x: usize, y: usize) -> [f32; 3] {
        let plane = self.width * self.height;
        let i = y * self.width + x;
        [self.data[i], self.data[plane + i], self.data[2 * plane + i]]
    }

    /// `(1, 3, H, W)` tensor in `[0,1]`.
    pub fn to_tensor(&self, device: &Device, dtype: DType) -> Result<Tensor> {
        Ok(Tensor::from_slice(&self.data, (1, 3, self.height, self.width), device)?
            .to_dtype(dtype)?)
    }

    /// Accepts `(3, H, W)` or `(1, 3, H, W)`; values are clamped to `[0,1]`.
    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let (h, w) = match *t.dims() {
            [3, h, w] | [1, 3, h, w] => (h, w),
            ref d => return Err(Error::Shape(format!("color tensor must be 3xHxW, got {d:?}"))),
        };
        let data = t
            .to_dtype(DType::F32)?
            .flatten_all()?
            .to_vec1::<f32>()?
            .into_iter()
            .map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) })
            .collect();
        Ok(Self { width: w, height: h, data })
    }

    /// Replicate a single-channel raster into three equal channels.
    pub fn from_gray_planes(width: usize, height: usize, plane: &[f32]) -> Self {
        let mut data = Vec::with_capacity(3 * plane.len());
        for _ in 0..3 {
            data.extend_from_slice(plane);
        }
        Self { width, height, data }
    }

    pub fn to_rgb(&self) -> ImageBuffer<Rgb<f32>, Vec<f32>> {
        ImageBuffer::from_fn(self.width as u32, self.height as u32, |x, y| {
            Rgb(self.rgb(x as usize, y as usize))
        })
    }

    pub fn from_rgb(img: &ImageBuffer<Rgb<f32>, Vec<f32>>) -> Self {
        let (w, h) = (img.width() as usize, img.height() as usize);
        let plane = w * h;
        let mut data = vec![0.0; 3 * plane];
        for (x, y, px) in img.enumerate_pixels() {
            let i = y as usize * w + x as usize;
            for c in 0..3 {
                data[c * plane + i] = px.0[c].clamp(0.0, 1.0);
            }
        }
        Self { width: w, height: h, data }
    }

    pub fn resized(&self, size: usize) -> Self {
        if self.width == size && self.height == size {
            return self.clone();
        }
        let out =
            image::imageops::resize(&self.to_rgb(), size as u32, size as u32, FilterType::Triangle);
        Self::from_rgb(&out)
    }

    /// Pad to a square with white, then resize to `size`×`size`.
    pub fn normalized(&self, size: usize) -> Self {
        let side = self.width.max(self.height);
        if side == self.width && side == self.height {
            return self.resized(size);
        }
        let (ox, oy) = ((side - self.width) / 2, (side - self.height) / 2);
        let square = ImageBuffer::from_fn(side as u32, side as u32, |x, y| {
            let (x, y) = (x as usize, y as usize);
            if x >= ox && x < ox + self.width && y >= oy && y < oy + self.height {
                Rgb(self.rgb(x - ox, y - oy))
            } else {
                Rgb([1.0; 3])
            }
        });
        Self::from_rgb(&square).resized(size)
    }

    pub fn to_png_bytes(&self) -> Result<Vec<u8>> {
        let img = DynamicImage::ImageRgb8(ImageBuffer::from_fn(
            self.width as u32,
            self.height as u32,
            |x, y| Rgb(self.rgb(x as usize, y as usize).map(quantize)),
        ));
        encode_png(&img)
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_png_bytes()?)?;
        Ok(())
    }

    pub fn from_dynamic(img: &DynamicImage) -> Self {
        Self::from_rgb(&img.to_rgb32f())
    }

    pub fn from_png_bytes(bytes: &[u8]) -> Result<Self> {
        Ok(Self::from_dynamic(&image::load_from_memory(bytes)?))
    }
}

impl From<&SketchImage> for ColorPhoto {
    fn from(s: &SketchImage) -> Self {
        ColorPhoto::from_gray_planes(s.width, s.height, &s.data)
    }
}

impl From<&GrayscalePhoto> for ColorPhoto {
    fn from(g: &GrayscalePhoto) -> Self {
        ColorPhoto::from_gray_planes(g.width, g.height, &g.data)
    }
}

impl From<GrayscalePhoto> for SketchImage {
    fn from(g: GrayscalePhoto) -> Self {
        SketchImage { width: g.width, height: g.height, data: g.data }
    }
}

fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn encode_png(img: &DynamicImage) -> Result<Vec<u8>> {
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png)?;
    Ok(buf.into_inner())
}

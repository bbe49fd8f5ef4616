use std::path::Path;

use image::{ImageBuffer, Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Scalar;

/// RGB image stored channel-planar (`[c][y][x]`) with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanarImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl PlanarImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != 3 * width * height {
            return Err(Error::InvalidInput(format!(
                "{} values cannot fill a 3x{height}x{width} image",
                data.len()
            )));
        }
        Ok(PlanarImage { width, height, data })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        PlanarImage { width, height, data: vec![0.0; 3 * width * height] }
    }

    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn at_mut(&mut self, c: usize, y: usize, x: usize) -> &mut f32 {
        &mut self.data[(c * self.height + y) * self.width + x]
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.width * self.height;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> PlanarImage {
        assert!(x0 + width <= self.width && y0 + height <= self.height, "crop out of bounds");
        let mut data = Vec::with_capacity(3 * width * height);
        for c in 0..3 {
            for y in y0..y0 + height {
                let row = (c * self.height + y) * self.width;
                data.extend_from_slice(&self.data[row + x0..row + x0 + width]);
            }
        }
        PlanarImage { width, height, data }
    }

    pub fn from_rgb8(img: &RgbImage) -> Self {
        let (w, h) = (img.width() as usize, img.height() as usize);
        let mut out = PlanarImage::zeros(w, h);
        for (x, y, px) in img.enumerate_pixels() {
            for c in 0..3 {
                *out.at_mut(c, y as usize, x as usize) = px[c] as f32 / 255.0;
            }
        }
        out
    }

    pub fn to_rgb8(&self) -> RgbImage {
        ImageBuffer::from_fn(self.width as u32, self.height as u32, |x, y| {
            let px = |c| quantize(self.at(c, y as usize, x as usize));
            Rgb([px(0), px(1), px(2)])
        })
    }

    /// Rounds every value onto the 8-bit grid.
    pub fn quantized(&self) -> PlanarImage {
        PlanarImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| quantize(v) as f32 / 255.0).collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|e| Error::Image { path: path.into(), source: e })?;
        Ok(Self::from_rgb8(&img.to_rgb8()))
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        self.to_rgb8()
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| Error::Image { path: path.into(), source: e })
    }
}

fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Square crop of an image, channel-planar.
#[derive(Clone, Debug, PartialEq)]
pub struct Patch {
    pub size: usize,
    pub origin: (usize, usize),
    pub data: Vec<f32>,
}

impl Patch {
    pub fn from_image(image: &PlanarImage, x: usize, y: usize, size: usize) -> Self {
        Patch { size, origin: (x, y), data: image.crop(x, y, size, size).data }
    }
}

/// Per-channel standardization applied before the encoder.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: [f32; 3],
    pub std: [f32; 3],
}

impl Default for Normalization {
    fn default() -> Self {
        Normalization { mean: [0.5; 3], std: [0.5; 3] }
    }
}

impl Normalization {
    pub fn validate(&self) -> Result<()> {
        if self.std.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidConfig("normalization std must be positive".into()));
        }
        Ok(())
    }

    pub fn apply<T: Scalar>(&self, patch: &Patch) -> Vec<T> {
        let plane = patch.size * patch.size;
        patch
            .data
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let c = i / plane;
                T::of(((v - self.mean[c]) / self.std[c]) as f64)
            })
            .collect()
    }
}

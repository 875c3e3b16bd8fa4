use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, Rgb};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// BT.601 luma weights.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

pub const MIN_SIDE: usize = 8;

/// A single channel-major image with values in `[0, 1]`.
///
/// Stored as a `[1, channels, height, width]` tensor so it can be stacked
/// into batches without reshaping.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageTensor(Tensor);

impl ImageTensor {
    pub fn new(channels: usize, height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        Self::from_tensor(Tensor::from_vec([1, channels, height, width], values)?)
    }

    pub fn from_tensor(t: Tensor) -> Result<Self> {
        let [n, c, h, w] = t.shape();
        if n != 1 {
            return Err(Error::InvalidImage(format!(
                "expected a single image, got batch of {n}"
            )));
        }
        if c != 1 && c != 3 {
            return Err(Error::InvalidImage(format!(
                "{c} channels (expected 1 or 3)"
            )));
        }
        if h < MIN_SIDE || w < MIN_SIDE {
            return Err(Error::InvalidImage(format!(
                "{h}x{w} is smaller than {MIN_SIDE}x{MIN_SIDE}"
            )));
        }
        if let Some(v) = t
            .data()
            .iter()
            .find(|v| !(v.is_finite() && (0.0..=1.0).contains(*v)))
        {
            return Err(Error::InvalidImage(format!("value {v} outside [0, 1]")));
        }
        Ok(ImageTensor(t))
    }

    /// Splits a batch tensor into images, one per sample.
    pub fn unstack(batch: &Tensor) -> Result<Vec<ImageTensor>> {
        (0..batch.batch())
            .map(|i| Self::from_tensor(batch.sample_tensor(i)))
            .collect()
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(
            channels,
            height,
            width,
            vec![value; channels * height * width],
        )
    }

    pub fn channels(&self) -> usize {
        self.0.channels()
    }

    pub fn height(&self) -> usize {
        self.0.height()
    }

    pub fn width(&self) -> usize {
        self.0.width()
    }

    pub fn values(&self) -> &[f64] {
        self.0.data()
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.height() * self.width();
        &self.0.data()[c * n..(c + 1) * n]
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor {
        self.0
    }

    pub fn same_dims(&self, other: &ImageTensor) -> bool {
        self.height() == other.height() && self.width() == other.width()
    }

    /// Applies `f` to every value, clamping the result back into `[0, 1]`.
    pub(crate) fn map_clamped(&self, f: impl Fn(f64) -> f64) -> ImageTensor {
        ImageTensor(self.0.map(|v| f(v).clamp(0.0, 1.0)))
    }

    /// A 1-channel image replicated to three channels.
    pub fn to_rgb(&self) -> ImageTensor {
        if self.channels() == 3 {
            return self.clone();
        }
        let mut v = Vec::with_capacity(3 * self.values().len());
        for _ in 0..3 {
            v.extend_from_slice(self.values());
        }
        ImageTensor(Tensor::from_vec([1, 3, self.height(), self.width()], v).expect("rgb shape"))
    }

    /// Interleaved 8-bit samples with round-half-up quantization.
    pub fn to_u8_interleaved(&self) -> Vec<u8> {
        let (c, n) = (self.channels(), self.height() * self.width());
        let mut out = Vec::with_capacity(c * n);
        for i in 0..n {
            for ch in 0..c {
                out.push(quantize(self.0.data()[ch * n + i]));
            }
        }
        out
    }

    pub fn from_u8_interleaved(
        channels: usize,
        height: usize,
        width: usize,
        raw: &[u8],
    ) -> Result<Self> {
        let n = height * width;
        if raw.len() != channels * n {
            return Err(Error::InvalidImage(format!(
                "{} bytes for a {channels}x{height}x{width} image",
                raw.len()
            )));
        }
        let mut values = vec![0.0; channels * n];
        for i in 0..n {
            for ch in 0..channels {
                values[ch * n + i] = f64::from(raw[i * channels + ch]) / 255.0;
            }
        }
        Self::new(channels, height, width, values)
    }
}

pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

/// Weighted channel projection to a single luma plane.
pub fn rgb_to_grayscale(img: &ImageTensor) -> Result<ImageTensor> {
    if img.channels() != 3 {
        return Err(Error::ChannelMismatch {
            expected: 3,
            actual: img.channels(),
        });
    }
    let [wr, wg, wb] = LUMA_WEIGHTS;
    let (r, g, b) = (img.plane(0), img.plane(1), img.plane(2));
    let gray = r
        .iter()
        .zip(g)
        .zip(b)
        .map(|((r, g), b)| (wr * r + wg * g + wb * b).clamp(0.0, 1.0))
        .collect();
    ImageTensor::new(1, img.height(), img.width(), gray)
}

/// Reads an 8-bit grayscale or RGB raster; alpha channels are dropped.
pub fn load_image(path: &Path) -> Result<ImageTensor> {
    if !path.exists() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
        ));
    }
    let img = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    if w == 0 || h == 0 {
        return Err(Error::InvalidImage(format!(
            "{}: zero-sized image",
            path.display()
        )));
    }
    let unsupported = |what: &str| {
        Err(Error::InvalidImage(format!(
            "{}: unsupported pixel format {what} (expected 8-bit gray or RGB)",
            path.display()
        )))
    };
    match img {
        DynamicImage::ImageLuma8(buf) => ImageTensor::from_u8_interleaved(1, h, w, buf.as_raw()),
        DynamicImage::ImageLumaA8(_) => {
            ImageTensor::from_u8_interleaved(1, h, w, img.to_luma8().as_raw())
        }
        DynamicImage::ImageRgb8(buf) => ImageTensor::from_u8_interleaved(3, h, w, buf.as_raw()),
        DynamicImage::ImageRgba8(_) => {
            ImageTensor::from_u8_interleaved(3, h, w, img.to_rgb8().as_raw())
        }
        other => unsupported(&format!("{:?}", other.color())),
    }
}

/// Writes an 8-bit PNG (grayscale or RGB, matching the channel count).
pub fn save_png(img: &ImageTensor, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let (w, h) = (img.width() as u32, img.height() as u32);
    let raw = img.to_u8_interleaved();
    let res = if img.channels() == 1 {
        ImageBuffer::<Luma<u8>, _>::from_raw(w, h, raw).map(|b| b.save(path))
    } else {
        ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, raw).map(|b| b.save(path))
    };
    res.expect("buffer size matches dimensions")
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
}

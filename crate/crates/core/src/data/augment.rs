//! Paired geometric and photometric augmentation.
//!
//! Transforms are applied in the order scale, crop, mirror, contrast. The
//! same geometric transform is applied to every image of a sample and the
//! grayscale image is always re-derived from the augmented RGB.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::image::ImageTensor;
use crate::data::sample::{GraySample, PairedSample};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub enable_scale: bool,
    pub enable_mirror: bool,
    pub enable_crop: bool,
    pub enable_contrast: bool,
    pub scale_range: (f64, f64),
    pub crop_size: usize,
    pub contrast_range: (f64, f64),
}

impl AugmentConfig {
    /// Every transform switched off.
    pub fn disabled() -> Self {
        AugmentConfig {
            enable_scale: false,
            enable_mirror: false,
            enable_crop: false,
            enable_contrast: false,
            scale_range: (1.0, 1.0),
            crop_size: 8,
            contrast_range: (1.0, 1.0),
        }
    }

    /// Training default: mild upscaling cropped back to `size`, mirroring, and contrast jitter.
    pub fn training(size: usize) -> Self {
        AugmentConfig {
            enable_scale: true,
            enable_mirror: true,
            enable_crop: true,
            enable_contrast: true,
            scale_range: (1.0, 1.25),
            crop_size: size,
            contrast_range: (0.9, 1.1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (slo, shi) = self.scale_range;
        if !(slo > 0.5 && shi <= 2.0 && slo <= shi) {
            return Err(Error::InvalidConfig(format!(
                "scale range ({slo}, {shi}) must lie within (0.5, 2.0]"
            )));
        }
        let (clo, chi) = self.contrast_range;
        if !(clo >= 0.5 && chi <= 1.5 && clo <= chi) {
            return Err(Error::InvalidConfig(format!(
                "contrast range ({clo}, {chi}) must lie within [0.5, 1.5]"
            )));
        }
        if self.crop_size < crate::data::image::MIN_SIDE {
            return Err(Error::InvalidConfig(format!(
                "crop size {} is too small",
                self.crop_size
            )));
        }
        Ok(())
    }
}

/// One concrete draw of the augmentation parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentPlan {
    /// Target `(height, width)` after rescaling.
    pub resize: Option<(usize, usize)>,
    /// `(top, left, size)` of the square crop.
    pub crop: Option<(usize, usize, usize)>,
    pub mirror: bool,
    pub contrast: Option<f64>,
}

impl AugmentPlan {
    pub fn identity() -> Self {
        AugmentPlan {
            resize: None,
            crop: None,
            mirror: false,
            contrast: None,
        }
    }

    /// Draws a plan for an image of `height x width`.
    pub fn draw<R: Rng + ?Sized>(
        rng: &mut R,
        cfg: &AugmentConfig,
        height: usize,
        width: usize,
    ) -> Result<Self> {
        cfg.validate()?;
        let mut plan = AugmentPlan::identity();
        let (mut h, mut w) = (height, width);
        if cfg.enable_scale {
            let (lo, hi) = cfg.scale_range;
            let s = if hi > lo {
                rng.random_range(lo..=hi)
            } else {
                lo
            };
            h = ((height as f64 * s).round() as usize).max(1);
            w = ((width as f64 * s).round() as usize).max(1);
            plan.resize = Some((h, w));
        }
        if cfg.enable_crop {
            let size = cfg.crop_size;
            if size > h || size > w {
                return Err(Error::InvalidConfig(format!(
                    "crop {size} larger than {h}x{w} image"
                )));
            }
            let top = rng.random_range(0..=h - size);
            let left = rng.random_range(0..=w - size);
            plan.crop = Some((top, left, size));
        }
        if cfg.enable_mirror {
            plan.mirror = rng.random_bool(0.5);
        }
        if cfg.enable_contrast {
            let (lo, hi) = cfg.contrast_range;
            plan.contrast = Some(if hi > lo {
                rng.random_range(lo..=hi)
            } else {
                lo
            });
        }
        Ok(plan)
    }

    fn geometric(&self, img: &ImageTensor) -> Result<ImageTensor> {
        let mut out = img.clone();
        if let Some((h, w)) = self.resize {
            out = resize_bilinear(&out, h, w)?;
        }
        if let Some((top, left, size)) = self.crop {
            out = crop(&out, top, left, size)?;
        }
        if self.mirror {
            out = mirror(&out);
        }
        Ok(out)
    }

    fn photometric(&self, img: ImageTensor) -> ImageTensor {
        match self.contrast {
            Some(g) if g != 1.0 => adjust_contrast(&img, g),
            _ => img,
        }
    }

    pub fn apply_paired(&self, s: &PairedSample) -> Result<PairedSample> {
        let nir = self.photometric(self.geometric(s.nir())?);
        let rgb = self.photometric(self.geometric(s.rgb())?);
        PairedSample::new(s.id(), nir, rgb)
    }

    pub fn apply_gray(&self, s: &GraySample) -> Result<GraySample> {
        let rgb = self.photometric(self.geometric(s.rgb())?);
        GraySample::new(s.id(), rgb)
    }
}

/// Samples that can be augmented with one shared draw.
pub trait Augment: Sized {
    fn augment<R: Rng + ?Sized>(&self, rng: &mut R, cfg: &AugmentConfig) -> Result<Self>;
}

impl Augment for PairedSample {
    fn augment<R: Rng + ?Sized>(&self, rng: &mut R, cfg: &AugmentConfig) -> Result<Self> {
        AugmentPlan::draw(rng, cfg, self.rgb().height(), self.rgb().width())?.apply_paired(self)
    }
}

impl Augment for GraySample {
    fn augment<R: Rng + ?Sized>(&self, rng: &mut R, cfg: &AugmentConfig) -> Result<Self> {
        AugmentPlan::draw(rng, cfg, self.rgb().height(), self.rgb().width())?.apply_gray(self)
    }
}

pub fn augment<T: Augment, R: Rng + ?Sized>(
    sample: &T,
    rng: &mut R,
    cfg: &AugmentConfig,
) -> Result<T> {
    sample.augment(rng, cfg)
}

/// `clamp(gain * (v - 0.5) + 0.5, 0, 1)` on every value.
pub fn adjust_contrast(img: &ImageTensor, gain: f64) -> ImageTensor {
    img.map_clamped(|v| gain * (v - 0.5) + 0.5)
}

/// Horizontal flip.
pub fn mirror(img: &ImageTensor) -> ImageTensor {
    let (c, h, w) = (img.channels(), img.height(), img.width());
    let mut v = Vec::with_capacity(img.values().len());
    for row in img.values().chunks(w) {
        v.extend(row.iter().rev());
    }
    ImageTensor::new(c, h, w, v).expect("mirror preserves invariants")
}

pub fn crop(img: &ImageTensor, top: usize, left: usize, size: usize) -> Result<ImageTensor> {
    let (c, h, w) = (img.channels(), img.height(), img.width());
    if top + size > h || left + size > w {
        return Err(Error::InvalidConfig(format!(
            "crop {size} at ({top}, {left}) exceeds {h}x{w} image"
        )));
    }
    let mut v = Vec::with_capacity(c * size * size);
    for ch in 0..c {
        let plane = img.plane(ch);
        for y in top..top + size {
            v.extend_from_slice(&plane[y * w + left..y * w + left + size]);
        }
    }
    ImageTensor::new(c, size, size, v)
}

/// Bilinear resampling with half-pixel centers and edge clamping.
pub fn resize_bilinear(img: &ImageTensor, out_h: usize, out_w: usize) -> Result<ImageTensor> {
    let (c, h, w) = (img.channels(), img.height(), img.width());
    if (out_h, out_w) == (h, w) {
        return Ok(img.clone());
    }
    let sy = h as f64 / out_h as f64;
    let sx = w as f64 / out_w as f64;
    let coord = |o: usize, scale: f64, len: usize| {
        let p = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (len - 1) as f64);
        let i0 = p.floor() as usize;
        let i1 = (i0 + 1).min(len - 1);
        (i0, i1, p - i0 as f64)
    };
    let mut v = Vec::with_capacity(c * out_h * out_w);
    for ch in 0..c {
        let plane = img.plane(ch);
        for oy in 0..out_h {
            let (y0, y1, fy) = coord(oy, sy, h);
            for ox in 0..out_w {
                let (x0, x1, fx) = coord(ox, sx, w);
                let top = plane[y0 * w + x0] * (1.0 - fx) + plane[y0 * w + x1] * fx;
                let bot = plane[y1 * w + x0] * (1.0 - fx) + plane[y1 * w + x1] * fx;
                v.push((top * (1.0 - fy) + bot * fy).clamp(0.0, 1.0));
            }
        }
    }
    ImageTensor::new(c, out_h, out_w, v)
}

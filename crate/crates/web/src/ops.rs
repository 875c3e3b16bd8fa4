use nircolor::data::{synth_dataset, AugmentConfig, AugmentPlan, ImageTensor};
use nircolor::{eval, losses, Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Largest scene index served, to bound rendering work.
pub const MAX_INDEX: usize = 999;
pub const MIN_SIDE: usize = 16;
pub const MAX_SIDE: usize = 256;

#[derive(Clone, Debug, PartialEq)]
pub struct View {
    pub nir: ImageTensor,
    pub gray: ImageTensor,
    pub rgb: ImageTensor,
}

pub fn scene(seed: u64, index: usize, side: usize) -> Result<View> {
    if index > MAX_INDEX {
        return Err(Error::InvalidConfig(format!(
            "scene index {index} exceeds {MAX_INDEX}"
        )));
    }
    if !(MIN_SIDE..=MAX_SIDE).contains(&side) {
        return Err(Error::InvalidConfig(format!(
            "side {side} outside {MIN_SIDE}..={MAX_SIDE}"
        )));
    }
    let (mut paired, _) = synth_dataset(&mut ChaCha8Rng::seed_from_u64(seed), index + 1, 1, side)?;
    let s = paired.swap_remove(index);
    Ok(View {
        nir: s.nir().clone(),
        gray: s.gray().clone(),
        rgb: s.rgb().clone(),
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Transforms {
    pub scale: bool,
    pub mirror: bool,
    pub crop: bool,
    pub contrast: bool,
}

/// The training augmentation with only the chosen transforms, drawn with `draw`.
pub fn augmented_scene(
    seed: u64,
    index: usize,
    side: usize,
    draw: u64,
    t: Transforms,
) -> Result<View> {
    let v = scene(seed, index, side)?;
    let mut cfg = AugmentConfig::training(side);
    cfg.enable_scale = t.scale;
    cfg.enable_mirror = t.mirror;
    cfg.enable_contrast = t.contrast;
    // Without the crop an upscaled image would change size.
    cfg.enable_crop = t.crop || t.scale;
    let plan = AugmentPlan::draw(&mut ChaCha8Rng::seed_from_u64(draw), &cfg, side, side)?;
    let sample = nircolor::data::PairedSample::new("view", v.nir, v.rgb)?;
    let out = plan.apply_paired(&sample)?;
    Ok(View {
        nir: out.nir().clone(),
        gray: out.gray().clone(),
        rgb: out.rgb().clone(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Degradation {
    /// Standard deviation of additive Gaussian noise.
    pub noise: f64,
    /// Per-channel offset.
    pub cast: [f64; 3],
    /// Contrast gain about mid-gray.
    pub gain: f64,
}

impl Degradation {
    pub fn none() -> Self {
        Degradation {
            noise: 0.0,
            cast: [0.0; 3],
            gain: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    pub psnr: f64,
    pub ssim: f64,
    pub ms_ssim: f64,
    /// Degrees.
    pub ae: f64,
    pub mix: f64,
}

pub fn score(pred: &ImageTensor, gt: &ImageTensor) -> Result<Metrics> {
    Ok(Metrics {
        psnr: eval::psnr(pred, gt)?,
        ssim: eval::ssim(pred, gt)?,
        ms_ssim: losses::ms_ssim_value(pred.tensor(), gt.tensor())?,
        ae: eval::angular_error(pred, gt)?,
        mix: losses::mix_loss_value(pred.tensor(), gt.tensor())?,
    })
}

pub fn degrade(img: &ImageTensor, d: &Degradation, noise_seed: u64) -> Result<ImageTensor> {
    if !(d.noise >= 0.0
        && d.noise.is_finite()
        && d.gain.is_finite()
        && d.cast.iter().all(|c| c.is_finite()))
    {
        return Err(Error::InvalidConfig(
            "degradation parameters must be finite and noise nonnegative".into(),
        ));
    }
    let normal = Normal::new(0.0, d.noise).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
    let plane = img.height() * img.width();
    let values = img
        .values()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let c = (i / plane).min(2);
            let n = if d.noise > 0.0 {
                normal.sample(&mut rng)
            } else {
                0.0
            };
            (d.gain * v + (1.0 - d.gain) * 0.5 + d.cast[c] + n).clamp(0.0, 1.0)
        })
        .collect();
    ImageTensor::new(img.channels(), img.height(), img.width(), values)
}

pub fn degrade_and_score(
    seed: u64,
    index: usize,
    side: usize,
    d: &Degradation,
) -> Result<(ImageTensor, Metrics)> {
    let v = scene(seed, index, side)?;
    let noise_seed = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ index as u64;
    let out = degrade(&v.rgb, d, noise_seed)?;
    let m = score(&out, &v.rgb)?;
    Ok((out, m))
}

/// RGBA bytes of a one- or three-channel image.
pub fn to_rgba(img: &ImageTensor) -> Vec<u8> {
    img.to_rgb()
        .to_u8_interleaved()
        .chunks_exact(3)
        .flat_map(|p| [p[0], p[1], p[2], 255])
        .collect()
}

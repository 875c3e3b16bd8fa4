//! Synthetic NIR / RGB scenes with a known per-material spectral response.
//!
//! Each scene is a smooth random field (a sum of [`BUMPS`] Gaussian bumps)
//! quantized into [`MATERIALS`] labels. Every label has a fixed RGB color and
//! a NIR intensity given by [`nir_response`], so NIR is a deterministic but
//! non-monotone function of luminance.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::image::ImageTensor;
use crate::data::sample::{GraySample, PairedSample};
use crate::error::{Error, Result};

pub const BUMPS: usize = 4;
pub const MATERIALS: usize = 5;
pub const NOISE_SIGMA: f64 = 0.01;

/// Material colors, ordered by field level and by luminance. NIR follows
/// luminance order except for the first two materials, which swap.
pub const MATERIAL_RGB: [[f64; 3]; MATERIALS] = [
    [0.27, 0.51, 0.47],
    [0.14, 0.63, 0.96],
    [0.68, 0.61, 0.57],
    [0.73, 0.82, 0.15],
    [0.93, 0.91, 0.35],
];

/// Stream offset separating grayscale-only scenes from paired scenes.
const GRAY_STREAM_BASE: u64 = 1 << 32;

fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

/// `clamp(0.6 * R_lin + 0.4 * exp(-2 B), 0, 1)` with `R_lin` the linearized sRGB red.
pub fn nir_response(rgb: [f64; 3]) -> f64 {
    (0.6 * srgb_to_linear(rgb[0]) + 0.4 * (-2.0 * rgb[2]).exp()).clamp(0.0, 1.0)
}

/// Material label map of one scene, row-major `size x size`.
pub fn material_field<R: Rng + ?Sized>(rng: &mut R, size: usize) -> Vec<usize> {
    let bumps: Vec<[f64; 4]> = (0..BUMPS)
        .map(|_| {
            [
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..1.0),
                rng.random_range(0.15..0.45),
                rng.random_range(-1.0..1.0),
            ]
        })
        .collect();
    let field: Vec<f64> = (0..size * size)
        .map(|i| {
            let (y, x) = ((i / size) as f64 + 0.5, (i % size) as f64 + 0.5);
            let (u, v) = (x / size as f64, y / size as f64);
            bumps
                .iter()
                .map(|&[cx, cy, s, a]| {
                    a * (-((u - cx).powi(2) + (v - cy).powi(2)) / (2.0 * s * s)).exp()
                })
                .sum()
        })
        .collect();
    let lo = field.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = field.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    field
        .iter()
        .map(|&f| {
            if span < 1e-12 {
                0
            } else {
                (((f - lo) / span * MATERIALS as f64) as usize).min(MATERIALS - 1)
            }
        })
        .collect()
}

/// Renders scene `stream` of the generator seeded with `seed`: `(nir, rgb)`.
fn render_scene(seed: u64, stream: u64, size: usize) -> Result<(ImageTensor, ImageTensor)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let labels = material_field(&mut rng, size);
    let noise = Normal::new(0.0, NOISE_SIGMA).expect("valid sigma");
    let n = size * size;
    let mut nir = vec![0.0; n];
    let mut rgb = vec![0.0; 3 * n];
    for (i, &m) in labels.iter().enumerate() {
        let color = MATERIAL_RGB[m];
        nir[i] = (nir_response(color) + noise.sample(&mut rng)).clamp(0.0, 1.0);
        for c in 0..3 {
            rgb[c * n + i] = (color[c] + noise.sample(&mut rng)).clamp(0.0, 1.0);
        }
    }
    Ok((
        ImageTensor::new(1, size, size, nir)?,
        ImageTensor::new(3, size, size, rgb)?,
    ))
}

/// Draws a synthetic dataset. Scene `i` depends only on the first value drawn
/// from `rng` and on `i`, not on the requested counts.
pub fn synth_dataset<R: RngCore + ?Sized>(
    rng: &mut R,
    n_paired: usize,
    n_gray: usize,
    size: usize,
) -> Result<(Vec<PairedSample>, Vec<GraySample>)> {
    if size < 16 {
        return Err(Error::InvalidConfig(format!(
            "synthetic size {size} must be at least 16"
        )));
    }
    if n_paired == 0 || n_gray == 0 {
        return Err(Error::InvalidConfig(
            "synthetic counts must be at least 1".into(),
        ));
    }
    let seed = rng.next_u64();
    let paired = (0..n_paired)
        .map(|i| {
            let (nir, rgb) = render_scene(seed, i as u64, size)?;
            PairedSample::new(format!("p{i:05}"), nir, rgb)
        })
        .collect::<Result<Vec<_>>>()?;
    let gray = (0..n_gray)
        .map(|i| {
            let (_, rgb) = render_scene(seed, GRAY_STREAM_BASE + i as u64, size)?;
            GraySample::new(format!("g{i:05}"), rgb)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((paired, gray))
}

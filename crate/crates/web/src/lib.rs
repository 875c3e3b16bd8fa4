//! Browser bindings for three views of the `nircolor` data and metrics:
//! a synthetic scene viewer, an augmentation preview and a metrics explorer.
//!
//! Every export is a thin wrapper over a function in [`ops`] that returns
//! `nircolor::Result` and runs natively as well.

use wasm_bindgen::prelude::*;

pub mod ops;

pub use ops::{Metrics, View};

fn js(e: nircolor::Error) -> JsError {
    JsError::new(&format!("{}: {e}", e.kind()))
}

/// One RGBA image for a canvas.
#[wasm_bindgen]
pub struct Frame {
    side: usize,
    rgba: Vec<u8>,
}

#[wasm_bindgen]
impl Frame {
    #[wasm_bindgen(getter)]
    pub fn side(&self) -> usize {
        self.side
    }

    /// Row-major RGBA bytes, `side * side * 4` long.
    pub fn rgba(&self) -> Vec<u8> {
        self.rgba.clone()
    }
}

/// NIR, grayscale and RGB renderings of the same scene.
#[wasm_bindgen]
pub struct SceneFrames {
    nir: Frame,
    gray: Frame,
    rgb: Frame,
}

#[wasm_bindgen]
impl SceneFrames {
    pub fn nir(&self) -> Frame {
        self.nir.clone_frame()
    }

    pub fn gray(&self) -> Frame {
        self.gray.clone_frame()
    }

    pub fn rgb(&self) -> Frame {
        self.rgb.clone_frame()
    }
}

impl Frame {
    fn clone_frame(&self) -> Frame {
        Frame {
            side: self.side,
            rgba: self.rgba.clone(),
        }
    }
}

impl From<View> for SceneFrames {
    fn from(v: View) -> Self {
        let frame = |img: &nircolor::data::ImageTensor| Frame {
            side: img.width(),
            rgba: ops::to_rgba(img),
        };
        SceneFrames {
            nir: frame(&v.nir),
            gray: frame(&v.gray),
            rgb: frame(&v.rgb),
        }
    }
}

/// Scene number `index` of the synthetic set drawn with `seed`.
#[wasm_bindgen]
pub fn scene(seed: u32, index: u32, side: u32) -> Result<SceneFrames, JsError> {
    ops::scene(seed.into(), index as usize, side as usize)
        .map(Into::into)
        .map_err(js)
}

/// The scene after one augmentation draw with the chosen transforms.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn augmented_scene(
    seed: u32,
    index: u32,
    side: u32,
    draw: u32,
    scale: bool,
    mirror: bool,
    crop: bool,
    contrast: bool,
) -> Result<SceneFrames, JsError> {
    let t = ops::Transforms {
        scale,
        mirror,
        crop,
        contrast,
    };
    ops::augmented_scene(seed.into(), index as usize, side as usize, draw.into(), t)
        .map(Into::into)
        .map_err(js)
}

/// Scores of a degraded copy of the scene's RGB image against the original.
#[wasm_bindgen]
pub struct Scored {
    degraded: Frame,
    metrics: Metrics,
}

#[wasm_bindgen]
impl Scored {
    pub fn degraded(&self) -> Frame {
        self.degraded.clone_frame()
    }

    #[wasm_bindgen(getter)]
    pub fn psnr(&self) -> f64 {
        self.metrics.psnr
    }

    #[wasm_bindgen(getter)]
    pub fn ssim(&self) -> f64 {
        self.metrics.ssim
    }

    #[wasm_bindgen(getter)]
    pub fn ms_ssim(&self) -> f64 {
        self.metrics.ms_ssim
    }

    #[wasm_bindgen(getter)]
    pub fn ae(&self) -> f64 {
        self.metrics.ae
    }

    #[wasm_bindgen(getter)]
    pub fn mix(&self) -> f64 {
        self.metrics.mix
    }
}

/// Adds Gaussian noise of std `noise`, a color cast `(r, g, b)` and a gain
/// to the RGB scene and scores the result.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn degrade_and_score(
    seed: u32,
    index: u32,
    side: u32,
    noise: f64,
    cast_r: f64,
    cast_g: f64,
    cast_b: f64,
    gain: f64,
) -> Result<Scored, JsError> {
    let d = ops::Degradation {
        noise,
        cast: [cast_r, cast_g, cast_b],
        gain,
    };
    let (img, metrics) =
        ops::degrade_and_score(seed.into(), index as usize, side as usize, &d).map_err(js)?;
    Ok(Scored {
        degraded: Frame {
            side: img.width(),
            rgba: ops::to_rgba(&img),
        },
        metrics,
    })
}

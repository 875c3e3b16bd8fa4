//! Training objectives as differentiable functions on a [`Graph`].
//!
//! Adversarial terms use the least-squares form: discriminators regress real
//! inputs to 1 and generated inputs to 0, generators push generated inputs to 1.

use serde::{Deserialize, Serialize};

use crate::autograd::{Graph, Var};
use crate::error::{Error, Result};
use crate::kernels::gaussian_taps;
use crate::tensor::Tensor;

/// Weight of the structural term in [`mix_loss`].
pub const MIX_ALPHA: f64 = 0.84;

/// Per-scale MS-SSIM exponents, finest first.
pub const MS_SSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    /// Cycle consistency.
    pub lambda1: f64,
    /// Identity.
    pub lambda2: f64,
    /// Grayscale colorizer on latent grayscale.
    pub lambda3: f64,
    /// NIR colorizer on latent NIR.
    pub lambda4: f64,
    /// Pair loss.
    pub lambda_p: f64,
    /// Bilateral consistency.
    pub lambda_c: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda1: 0.1,
            lambda2: 0.01,
            lambda3: 0.025,
            lambda4: 0.025,
            lambda_p: 10.0,
            lambda_c: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.lambda1,
            self.lambda2,
            self.lambda3,
            self.lambda4,
            self.lambda_p,
            self.lambda_c,
        ];
        if all.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidConfig(format!(
                "loss weights must be >= 0: {all:?}"
            )));
        }
        Ok(())
    }

    /// `tran + lambda_p * pair + lambda_c * blt` on plain values.
    pub fn total(&self, tran: f64, pair: f64, blt: f64) -> Result<f64> {
        for (name, v) in [("tran", tran), ("pair", pair), ("blt", blt)] {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("{name} loss")));
            }
        }
        Ok(tran + self.lambda_p * pair + self.lambda_c * blt)
    }

    /// Generator-side translation loss on plain values.
    pub fn translation(&self, t: &TranslationValues) -> f64 {
        self.lambda1 * t.cyc
            + self.lambda2 * t.idt
            + t.gan_img_n
            + t.gan_feat_n
            + t.gan_img_g
            + t.gan_feat_g
    }
}

/// Values of every logged loss component for one step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub pair: f64,
    pub blt: f64,
    pub gan_img_n: f64,
    pub gan_feat_n: f64,
    pub gan_img_g: f64,
    pub gan_feat_g: f64,
    pub cyc: f64,
    pub idt: f64,
    pub tran: f64,
    pub total: f64,
    /// Discriminator objectives (not part of `total`).
    pub d_img_n: f64,
    pub d_feat_n: f64,
    pub d_img_g: f64,
    pub d_feat_g: f64,
    /// True when `blt` was recorded but kept out of the gradient.
    pub blt_excluded: bool,
}

impl LossBreakdown {
    pub fn components(&self) -> [(&'static str, f64); 14] {
        [
            ("pair", self.pair),
            ("blt", self.blt),
            ("gan_img_n", self.gan_img_n),
            ("gan_feat_n", self.gan_feat_n),
            ("gan_img_g", self.gan_img_g),
            ("gan_feat_g", self.gan_feat_g),
            ("cyc", self.cyc),
            ("idt", self.idt),
            ("tran", self.tran),
            ("total", self.total),
            ("d_img_n", self.d_img_n),
            ("d_feat_n", self.d_feat_n),
            ("d_img_g", self.d_img_g),
            ("d_feat_g", self.d_feat_g),
        ]
    }

    /// First non-finite component, if any.
    pub fn first_non_finite(&self) -> Option<&'static str> {
        self.components()
            .into_iter()
            .find(|(_, v)| !v.is_finite())
            .map(|(n, _)| n)
    }

    /// Recomputes `total` from the components.
    pub fn recomputed_total(&self, w: &LossWeights) -> f64 {
        let tran = w.translation(&TranslationValues {
            gan_img_n: self.gan_img_n,
            gan_feat_n: self.gan_feat_n,
            gan_img_g: self.gan_img_g,
            gan_feat_g: self.gan_feat_g,
            cyc: self.cyc,
            idt: self.idt,
        });
        let blt_weight = if self.blt_excluded { 0.0 } else { w.lambda_c };
        tran + w.lambda_p * self.pair + blt_weight * self.blt
    }

    /// Element-wise mean of several breakdowns.
    pub fn mean(items: &[LossBreakdown]) -> LossBreakdown {
        let n = items.len().max(1) as f64;
        let mut m = LossBreakdown {
            blt_excluded: items.first().is_some_and(|b| b.blt_excluded),
            ..Default::default()
        };
        for b in items {
            m.pair += b.pair / n;
            m.blt += b.blt / n;
            m.gan_img_n += b.gan_img_n / n;
            m.gan_feat_n += b.gan_feat_n / n;
            m.gan_img_g += b.gan_img_g / n;
            m.gan_feat_g += b.gan_feat_g / n;
            m.cyc += b.cyc / n;
            m.idt += b.idt / n;
            m.tran += b.tran / n;
            m.total += b.total / n;
            m.d_img_n += b.d_img_n / n;
            m.d_feat_n += b.d_feat_n / n;
            m.d_img_g += b.d_img_g / n;
            m.d_feat_g += b.d_feat_g / n;
        }
        m
    }
}

/// Plain values of the translation-loss components.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TranslationValues {
    pub gan_img_n: f64,
    pub gan_feat_n: f64,
    pub gan_img_g: f64,
    pub gan_feat_g: f64,
    pub cyc: f64,
    pub idt: f64,
}

/// Mean absolute difference.
pub fn l1(g: &mut Graph, a: Var, b: Var) -> Result<Var> {
    let d = g.sub(a, b)?;
    let d = g.abs(d);
    Ok(g.mean(d))
}

/// Number of scales used for an image whose shorter side is `side`.
pub fn ms_ssim_scales(side: usize) -> Result<usize> {
    if side < crate::data::image::MIN_SIDE {
        return Err(Error::TooSmall(format!(
            "side {side} is below one MS-SSIM scale"
        )));
    }
    if side < SSIM_WINDOW {
        return Ok(1);
    }
    let levels = (side as f64 / SSIM_WINDOW as f64).log2().floor() as usize + 1;
    Ok(levels.min(MS_SSIM_WEIGHTS.len()))
}

/// Gaussian window length used at every scale: 11 taps unless the coarsest
/// scale is smaller, in which case the largest odd length that fits.
pub fn ms_ssim_window(side: usize, scales: usize) -> usize {
    let coarsest = side >> (scales - 1);
    let fit = if coarsest % 2 == 1 {
        coarsest
    } else {
        coarsest - 1
    };
    fit.min(SSIM_WINDOW)
}

/// Mean SSIM and mean contrast-structure term per `(sample, channel)`.
fn ssim_terms(g: &mut Graph, a: Var, b: Var, taps: &[f64]) -> Result<(Var, Var)> {
    let mu_a = g.blur_valid(a, taps)?;
    let mu_b = g.blur_valid(b, taps)?;
    let aa = g.mul(a, a)?;
    let bb = g.mul(b, b)?;
    let ab = g.mul(a, b)?;
    let e_aa = g.blur_valid(aa, taps)?;
    let e_bb = g.blur_valid(bb, taps)?;
    let e_ab = g.blur_valid(ab, taps)?;
    let mu_aa = g.mul(mu_a, mu_a)?;
    let mu_bb = g.mul(mu_b, mu_b)?;
    let mu_ab = g.mul(mu_a, mu_b)?;
    let var_a = g.sub(e_aa, mu_aa)?;
    let var_b = g.sub(e_bb, mu_bb)?;
    let cov = g.sub(e_ab, mu_ab)?;

    let cs_num = g.affine(cov, 2.0, SSIM_C2);
    let var_sum = g.add(var_a, var_b)?;
    let cs_den = g.affine(var_sum, 1.0, SSIM_C2);
    let cs_map = g.div(cs_num, cs_den)?;

    let l_num = g.affine(mu_ab, 2.0, SSIM_C1);
    let mu_sum = g.add(mu_aa, mu_bb)?;
    let l_den = g.affine(mu_sum, 1.0, SSIM_C1);
    let lum = g.div(l_num, l_den)?;

    let ssim_map = g.mul(lum, cs_map)?;
    Ok((g.spatial_mean(ssim_map), g.spatial_mean(cs_map)))
}

/// Multi-scale SSIM with exponents renormalized over the usable scales.
/// Each color channel is scored separately and the scores are averaged.
pub fn ms_ssim(g: &mut Graph, a: Var, b: Var) -> Result<Var> {
    g.value(a).ensure_same_shape(g.value(b), "ms_ssim")?;
    let [_, _, h, w] = g.value(a).shape();
    let side = h.min(w);
    let scales = ms_ssim_scales(side)?;
    let taps = gaussian_taps(ms_ssim_window(side, scales), SSIM_SIGMA);
    let norm: f64 = MS_SSIM_WEIGHTS[..scales].iter().sum();

    let (mut x, mut y) = (a, b);
    let mut product: Option<Var> = None;
    for (s, weight) in MS_SSIM_WEIGHTS[..scales].iter().enumerate() {
        let (ssim, cs) = ssim_terms(g, x, y, &taps)?;
        let last = s + 1 == scales;
        let term = g.pow_positive(if last { ssim } else { cs }, weight / norm);
        product = Some(match product {
            Some(p) => g.mul(p, term)?,
            None => term,
        });
        if !last {
            x = g.avg_pool2(x)?;
            y = g.avg_pool2(y)?;
        }
    }
    Ok(g.mean(product.expect("at least one scale")))
}

/// `alpha * (1 - ms_ssim) + (1 - alpha) * l1` with `alpha = 0.84`.
pub fn mix_loss(g: &mut Graph, a: Var, b: Var) -> Result<Var> {
    let s = ms_ssim(g, a, b)?;
    let structural = g.affine(s, -MIX_ALPHA, MIX_ALPHA);
    let pixel = l1(g, a, b)?;
    let pixel = g.scale(pixel, 1.0 - MIX_ALPHA);
    g.add(structural, pixel)
}

/// Colorizer outputs and the RGB ground truths they are scored against.
#[derive(Clone, Copy, Debug)]
pub struct PairTerms {
    /// Grayscale colorizer on a real grayscale input.
    pub out_g_direct: Var,
    /// Grayscale colorizer on latent grayscale translated from NIR.
    pub out_g_latent: Var,
    /// NIR colorizer on a real NIR input.
    pub out_n_direct: Var,
    /// NIR colorizer on latent NIR translated from grayscale.
    pub out_n_latent: Var,
    /// RGB ground truth of the grayscale-domain sample.
    pub gt_gray_rgb: Var,
    /// RGB ground truth of the NIR-domain sample.
    pub gt_nir_rgb: Var,
}

/// Supervised pixel loss over direct and latent colorizations. Each latent
/// colorization is paired with the ground truth of the sample it came from.
pub fn pair_loss(g: &mut Graph, t: &PairTerms, w: &LossWeights) -> Result<Var> {
    let gd = l1(g, t.gt_gray_rgb, t.out_g_direct)?;
    let gl = l1(g, t.gt_nir_rgb, t.out_g_latent)?;
    let nd = l1(g, t.gt_nir_rgb, t.out_n_direct)?;
    let nl = l1(g, t.gt_gray_rgb, t.out_n_latent)?;
    let gl = g.scale(gl, w.lambda3);
    let nl = g.scale(nl, w.lambda4);
    let s = g.add(gd, gl)?;
    let s = g.add(s, nd)?;
    g.add(s, nl)
}

/// Agreement between direct and cross-domain colorizations of the same input.
pub fn bilateral_consistency_loss(
    g: &mut Graph,
    n2c: Var,
    n2g2c: Var,
    g2c: Var,
    g2n2c: Var,
) -> Result<Var> {
    let n = mix_loss(g, n2c, n2g2c)?;
    let gr = mix_loss(g, g2c, g2n2c)?;
    g.add(n, gr)
}

fn check_scores(g: &Graph, v: Var, what: &str) -> Result<()> {
    if !g.value(v).is_finite() {
        return Err(Error::NonFinite(format!("{what} discriminator scores")));
    }
    Ok(())
}

/// Discriminator objective: `mean((real - 1)^2) + mean(fake^2)`.
pub fn gan_loss_d(g: &mut Graph, real: Var, fake: Var) -> Result<Var> {
    check_scores(g, real, "real")?;
    check_scores(g, fake, "fake")?;
    let r = g.affine(real, 1.0, -1.0);
    let r = g.square(r);
    let r = g.mean(r);
    let f = g.square(fake);
    let f = g.mean(f);
    g.add(r, f)
}

/// Generator objective: `mean((fake - 1)^2)`.
pub fn gan_loss_g(g: &mut Graph, fake: Var) -> Result<Var> {
    check_scores(g, fake, "fake")?;
    let f = g.affine(fake, 1.0, -1.0);
    let f = g.square(f);
    Ok(g.mean(f))
}

/// `l1(N2G(G2N(x_g)), x_g) + l1(G2N(N2G(x_n)), x_n)` from precomputed round trips.
pub fn cycle_loss(
    g: &mut Graph,
    g_roundtrip: Var,
    g_orig: Var,
    n_roundtrip: Var,
    n_orig: Var,
) -> Result<Var> {
    let a = l1(g, g_roundtrip, g_orig)?;
    let b = l1(g, n_roundtrip, n_orig)?;
    g.add(a, b)
}

/// `l1(N2G(x_g), x_g) + l1(G2N(x_n), x_n)` from precomputed applications.
pub fn identity_loss(
    g: &mut Graph,
    n2g_of_gray: Var,
    gray: Var,
    g2n_of_nir: Var,
    nir: Var,
) -> Result<Var> {
    for v in [n2g_of_gray, gray, g2n_of_nir, nir] {
        let c = g.value(v).channels();
        if c != 1 {
            return Err(Error::ChannelMismatch {
                expected: 1,
                actual: c,
            });
        }
    }
    let a = l1(g, n2g_of_gray, gray)?;
    let b = l1(g, g2n_of_nir, nir)?;
    g.add(a, b)
}

/// Generator-side adversarial terms plus the cycle and identity losses.
#[derive(Clone, Copy, Debug)]
pub struct TranslationTerms {
    pub gan_img_n: Var,
    pub gan_feat_n: Var,
    pub gan_img_g: Var,
    pub gan_feat_g: Var,
    pub cyc: Var,
    pub idt: Var,
}

/// `lambda1 * cyc + lambda2 * idt + sum of the four adversarial terms`.
pub fn translation_loss(g: &mut Graph, t: &TranslationTerms, w: &LossWeights) -> Result<Var> {
    let cyc = g.scale(t.cyc, w.lambda1);
    let idt = g.scale(t.idt, w.lambda2);
    let mut s = g.add(cyc, idt)?;
    for v in [t.gan_img_n, t.gan_feat_n, t.gan_img_g, t.gan_feat_g] {
        s = g.add(s, v)?;
    }
    Ok(s)
}

/// `tran + lambda_p * pair + lambda_c * blt`.
pub fn total_loss(g: &mut Graph, tran: Var, pair: Var, blt: Var, w: &LossWeights) -> Result<Var> {
    for (name, v) in [("tran", tran), ("pair", pair), ("blt", blt)] {
        if !g.value(v).is_finite() {
            return Err(Error::NonFinite(format!("{name} loss")));
        }
    }
    let p = g.scale(pair, w.lambda_p);
    let b = g.scale(blt, w.lambda_c);
    let s = g.add(tran, p)?;
    g.add(s, b)
}

/// Scalar zero on `g`, for components a phase does not use.
pub fn zero(g: &mut Graph) -> Var {
    g.constant(Tensor::scalar(0.0))
}

fn eval2(a: &Tensor, b: &Tensor, f: impl Fn(&mut Graph, Var, Var) -> Result<Var>) -> Result<f64> {
    let mut g = Graph::new();
    let (av, bv) = (g.constant(a.clone()), g.constant(b.clone()));
    let out = f(&mut g, av, bv)?;
    Ok(g.scalar(out))
}

/// [`l1`] on plain tensors.
pub fn l1_value(a: &Tensor, b: &Tensor) -> Result<f64> {
    eval2(a, b, l1)
}

/// [`ms_ssim`] on plain tensors.
pub fn ms_ssim_value(a: &Tensor, b: &Tensor) -> Result<f64> {
    eval2(a, b, ms_ssim)
}

/// [`mix_loss`] on plain tensors.
pub fn mix_loss_value(a: &Tensor, b: &Tensor) -> Result<f64> {
    eval2(a, b, mix_loss)
}

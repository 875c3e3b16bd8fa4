//! Closed-form loss values, evaluated through the graph functions.

use nircolor::autograd::{Graph, Var};
use nircolor::losses::{self, LossWeights, PairTerms, TranslationTerms};
use nircolor::Tensor;

use super::{perturbed, rng, uniform};

pub struct Case {
    pub name: &'static str,
    pub got: f64,
    pub want: f64,
}

fn case(name: &'static str, got: f64, want: f64) -> Case {
    Case { name, got, want }
}

fn scalar(g: &mut Graph, v: f64) -> Var {
    g.constant(Tensor::scalar(v))
}

fn run(f: impl FnOnce(&mut Graph) -> Var) -> f64 {
    let mut g = Graph::new();
    let out = f(&mut g);
    g.scalar(out)
}

fn translation(cyc: f64, idt: f64, gans: [f64; 4], w: &LossWeights) -> f64 {
    run(|g| {
        let t = TranslationTerms {
            gan_img_n: scalar(g, gans[0]),
            gan_feat_n: scalar(g, gans[1]),
            gan_img_g: scalar(g, gans[2]),
            gan_feat_g: scalar(g, gans[3]),
            cyc: scalar(g, cyc),
            idt: scalar(g, idt),
        };
        losses::translation_loss(g, &t, w).unwrap()
    })
}

fn total(tran: f64, pair: f64, blt: f64) -> f64 {
    run(|g| {
        let (t, p, b) = (scalar(g, tran), scalar(g, pair), scalar(g, blt));
        losses::total_loss(g, t, p, b, &LossWeights::default()).unwrap()
    })
}

/// Every closed-form loss example, as `(got, want)` pairs.
pub fn loss_fixed_points() -> Vec<Case> {
    let mut r = rng(11);
    let w = LossWeights::default();
    let a = uniform(&mut r, [2, 3, 32, 32], 0.15, 0.85);
    let b = perturbed(&mut r, &a, 0.2);
    let a_off = a.map(|v| v + 0.1);
    let gray = uniform(&mut r, [2, 1, 16, 16], 0.1, 0.9);
    let gray2 = uniform(&mut r, [2, 1, 16, 16], 0.1, 0.9);
    let mut out = vec![];
    out.push(case(
        "l1 of equal inputs",
        losses::l1_value(&a, &a).unwrap(),
        0.0,
    ));
    out.push(case(
        "l1 of constant offset 0.1",
        losses::l1_value(&a, &a_off).unwrap(),
        0.1,
    ));
    out.push(case(
        "l1 symmetry",
        losses::l1_value(&a, &b).unwrap() - losses::l1_value(&b, &a).unwrap(),
        0.0,
    ));
    out.push(case(
        "ms_ssim of equal inputs",
        losses::ms_ssim_value(&a, &a).unwrap(),
        1.0,
    ));
    out.push(case(
        "ms_ssim scales at 32x32",
        losses::ms_ssim_scales(32).unwrap() as f64,
        2.0,
    ));
    out.push(case(
        "mix of equal inputs",
        losses::mix_loss_value(&a, &a).unwrap(),
        0.0,
    ));
    out.push(case(
        "mix with l1 0.1 and ms_ssim 1",
        {
            let ms_ssim = 1.0;
            losses::MIX_ALPHA * (1.0 - ms_ssim) + (1.0 - losses::MIX_ALPHA) * 0.1
        },
        0.016,
    ));
    out.push(case(
        "mix composition",
        losses::mix_loss_value(&a, &b).unwrap(),
        0.84 * (1.0 - losses::ms_ssim_value(&a, &b).unwrap())
            + 0.16 * losses::l1_value(&a, &b).unwrap(),
    ));

    let pair = |w: &LossWeights, latent_g_offset: f64, other: Option<&Tensor>| {
        run(|g| {
            let gt_g = g.constant(a.clone());
            let gt_n = g.constant(b.clone());
            let t = PairTerms {
                out_g_direct: g.constant(other.unwrap_or(&a).clone()),
                out_g_latent: g.constant(b.map(|v| v + latent_g_offset)),
                out_n_direct: g.constant(other.unwrap_or(&b).clone()),
                out_n_latent: g.constant(a.clone()),
                gt_gray_rgb: gt_g,
                gt_nir_rgb: gt_n,
            };
            losses::pair_loss(g, &t, w).unwrap()
        })
    };
    out.push(case("pair with exact outputs", pair(&w, 0.0, None), 0.0));
    out.push(case(
        "pair with latent gray offset 0.1",
        pair(&w, 0.1, None),
        0.0025,
    ));
    let no_latent = LossWeights {
        lambda3: 0.0,
        lambda4: 0.0,
        ..w
    };
    let c = uniform(&mut r, [2, 3, 32, 32], 0.0, 1.0);
    out.push(case(
        "pair without latent weights",
        pair(&no_latent, 0.3, Some(&c)),
        losses::l1_value(&a, &c).unwrap() + losses::l1_value(&b, &c).unwrap(),
    ));

    let blt = |p: &Tensor, q: &Tensor, s: &Tensor, t: &Tensor| {
        run(|g| {
            let vs = [p, q, s, t].map(|x| g.constant(x.clone()));
            losses::bilateral_consistency_loss(g, vs[0], vs[1], vs[2], vs[3]).unwrap()
        })
    };
    out.push(case("blt of identical pairs", blt(&a, &a, &b, &b), 0.0));
    out.push(case(
        "blt symmetry",
        blt(&a, &b, &c, &a) - blt(&b, &a, &a, &c),
        0.0,
    ));
    out.push(case(
        "blt composition",
        blt(&a, &b, &c, &a),
        super::oracle_mix(&a, &b) + super::oracle_mix(&c, &a),
    ));

    let gan_d = |real: f64, fake: f64| {
        run(|g| {
            let r = g.constant(Tensor::full([2, 1, 4, 4], real));
            let f = g.constant(Tensor::full([2, 1, 4, 4], fake));
            losses::gan_loss_d(g, r, f).unwrap()
        })
    };
    let gan_g = |fake: f64| {
        run(|g| {
            let f = g.constant(Tensor::full([2, 1, 4, 4], fake));
            losses::gan_loss_g(g, f).unwrap()
        })
    };
    out.push(case(
        "D loss of a perfect discriminator",
        gan_d(1.0, 0.0),
        0.0,
    ));
    out.push(case("G loss of a fooled discriminator", gan_g(1.0), 0.0));
    out.push(case("D loss at 0.5", gan_d(0.5, 0.5), 0.5));

    let gray_off = gray.map(|v| v + 0.1);
    let cyc = |g_rt: &Tensor, n_rt: &Tensor| {
        run(|g| {
            let vs = [g_rt, &gray, n_rt, &gray2].map(|x| g.constant(x.clone()));
            losses::cycle_loss(g, vs[0], vs[1], vs[2], vs[3]).unwrap()
        })
    };
    out.push(case(
        "cycle with identity translators",
        cyc(&gray, &gray2),
        0.0,
    ));
    out.push(case(
        "cycle with one round trip offset 0.1",
        cyc(&gray_off, &gray2),
        0.1,
    ));

    let idt = |n2g: &Tensor, g2n: &Tensor| {
        run(|g| {
            let vs = [n2g, &gray, g2n, &gray2].map(|x| g.constant(x.clone()));
            losses::identity_loss(g, vs[0], vs[1], vs[2], vs[3]).unwrap()
        })
    };
    out.push(case(
        "identity with identity translators",
        idt(&gray, &gray2),
        0.0,
    ));
    out.push(case(
        "identity with both terms offset 0.05",
        idt(&gray.map(|v| v + 0.05), &gray2.map(|v| v - 0.05)),
        0.1,
    ));

    out.push(case(
        "translation with cyc 1 and idt 1",
        translation(1.0, 1.0, [0.0; 4], &w),
        0.11,
    ));
    out.push(case(
        "translation of zeros",
        translation(0.0, 0.0, [0.0; 4], &w),
        0.0,
    ));
    let gans = [0.3, 0.2, 0.7, 0.1];
    out.push(case(
        "translation linearity",
        translation(0.4, 2.0, gans, &w),
        0.1 * 0.4 + 0.01 * 2.0 + gans.iter().sum::<f64>(),
    ));
    out.push(case(
        "translation additivity",
        translation(0.4, 2.0, gans, &w) + translation(1.0, 3.0, [0.5; 4], &w),
        translation(1.4, 5.0, [0.8, 0.7, 1.2, 0.6], &w),
    ));

    out.push(case(
        "total with tran 0.11 and pair 0.0025",
        total(0.11, 0.0025, 0.0),
        0.135,
    ));
    out.push(case("total of zeros", total(0.0, 0.0, 0.0), 0.0));
    out.push(case(
        "total composition",
        total(0.3, 0.02, 0.4),
        0.3 + 10.0 * 0.02 + 0.4,
    ));
    out
}

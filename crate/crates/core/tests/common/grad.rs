//! Finite-difference checks of every loss composed through small networks.

use nircolor::autograd::{Graph, Var};
use nircolor::losses::{self, LossWeights, PairTerms, TranslationTerms};
use nircolor::nets::{Bound, Discriminator, DiscriminatorSpec, Generator, GeneratorSpec, Params};
use nircolor::Tensor;

use super::{gradient_check, rng, uniform, widen, GradCheck};

pub const STEP: f64 = 1e-4;
pub const TOLERANCE: f64 = 1e-3;
/// Denominator floor for relative errors of near-zero gradients.
pub const FLOOR: f64 = 1e-6;

const G2N: usize = 0;
const N2G: usize = 1;
const FN: usize = 2;
const FG: usize = 3;
const DNI: usize = 4;
const DNF: usize = 5;
const DGI: usize = 6;
const DGF: usize = 7;

/// Eight two-level networks on 8x8 inputs.
pub struct Mini {
    translator: Generator,
    colorizer: Generator,
    d_img: Discriminator,
    d_feat: Discriminator,
    pub params: Vec<Params>,
    x_n: Tensor,
    x_g: Tensor,
    rgb_n: Tensor,
    rgb_g: Tensor,
}

struct Ctx<'a> {
    m: &'a Mini,
    b: &'a [Bound],
}

impl Ctx<'_> {
    fn tr(&self, g: &mut Graph, k: usize, x: Var) -> Var {
        self.m.translator.forward(g, &self.b[k], x).unwrap()
    }
    fn col(&self, g: &mut Graph, k: usize, x: Var) -> Var {
        self.m.colorizer.forward(g, &self.b[k], x).unwrap()
    }
    fn d_img(&self, g: &mut Graph, k: usize, x: Var) -> Var {
        self.m.d_img.forward(g, &self.b[k], x).unwrap()
    }
    fn d_feat(&self, g: &mut Graph, k: usize, x: Var) -> Var {
        self.m.d_feat.forward(g, &self.b[k], x).unwrap()
    }
    fn inputs(&self, g: &mut Graph) -> [Var; 4] {
        [&self.m.x_n, &self.m.x_g, &self.m.rgb_n, &self.m.rgb_g].map(|t| g.constant(t.clone()))
    }
    fn pair(&self, g: &mut Graph) -> Var {
        let [xn, xg, rn, rg] = self.inputs(g);
        let lat_g = self.tr(g, N2G, xn);
        let lat_n = self.tr(g, G2N, xg);
        let t = PairTerms {
            out_g_direct: self.col(g, FG, xg),
            out_g_latent: self.col(g, FG, lat_g),
            out_n_direct: self.col(g, FN, xn),
            out_n_latent: self.col(g, FN, lat_n),
            gt_gray_rgb: rg,
            gt_nir_rgb: rn,
        };
        losses::pair_loss(g, &t, &LossWeights::default()).unwrap()
    }
    fn blt(&self, g: &mut Graph) -> Var {
        let [xn, xg, _, _] = self.inputs(g);
        let n2c = self.col(g, FN, xn);
        let lat_g = self.tr(g, N2G, xn);
        let n2g2c = self.col(g, FG, lat_g);
        let g2c = self.col(g, FG, xg);
        let lat_n = self.tr(g, G2N, xg);
        let g2n2c = self.col(g, FN, lat_n);
        losses::bilateral_consistency_loss(g, n2c, n2g2c, g2c, g2n2c).unwrap()
    }
    fn cyc(&self, g: &mut Graph) -> Var {
        let [xn, xg, _, _] = self.inputs(g);
        let a = self.tr(g, G2N, xg);
        let g_rt = self.tr(g, N2G, a);
        let b = self.tr(g, N2G, xn);
        let n_rt = self.tr(g, G2N, b);
        losses::cycle_loss(g, g_rt, xg, n_rt, xn).unwrap()
    }
    fn idt(&self, g: &mut Graph) -> Var {
        let [xn, xg, _, _] = self.inputs(g);
        let a = self.tr(g, N2G, xg);
        let b = self.tr(g, G2N, xn);
        losses::identity_loss(g, a, xg, b, xn).unwrap()
    }
    fn gan_g_terms(&self, g: &mut Graph) -> [Var; 4] {
        let [xn, xg, _, _] = self.inputs(g);
        let fake_n = self.tr(g, G2N, xg);
        let fake_g = self.tr(g, N2G, xn);
        let feat_n = self.col(g, FN, fake_n);
        let feat_g = self.col(g, FG, fake_g);
        let s = [
            self.d_img(g, DNI, fake_n),
            self.d_feat(g, DNF, feat_n),
            self.d_img(g, DGI, fake_g),
            self.d_feat(g, DGF, feat_g),
        ];
        s.map(|v| losses::gan_loss_g(g, v).unwrap())
    }
    fn gan_d_img(&self, g: &mut Graph) -> Var {
        let [xn, xg, _, _] = self.inputs(g);
        let real = self.d_img(g, DNI, xn);
        let fake_n = self.tr(g, G2N, xg);
        let fake = self.d_img(g, DNI, fake_n);
        losses::gan_loss_d(g, real, fake).unwrap()
    }
    fn gan_d_feat(&self, g: &mut Graph) -> Var {
        let [xn, xg, _, _] = self.inputs(g);
        let real_c = self.col(g, FG, xg);
        let real = self.d_feat(g, DGF, real_c);
        let lat = self.tr(g, N2G, xn);
        let fake_c = self.col(g, FG, lat);
        let fake = self.d_feat(g, DGF, fake_c);
        losses::gan_loss_d(g, real, fake).unwrap()
    }
    fn total(&self, g: &mut Graph) -> Var {
        let w = LossWeights::default();
        let [gan_img_n, gan_feat_n, gan_img_g, gan_feat_g] = self.gan_g_terms(g);
        let t = TranslationTerms {
            gan_img_n,
            gan_feat_n,
            gan_img_g,
            gan_feat_g,
            cyc: self.cyc(g),
            idt: self.idt(g),
        };
        let tran = losses::translation_loss(g, &t, &w).unwrap();
        let pair = self.pair(g);
        let blt = self.blt(g);
        losses::total_loss(g, tran, pair, blt, &w).unwrap()
    }
}

impl Mini {
    pub fn new(seed: u64) -> Mini {
        let mut r = rng(seed);
        let translator = Generator::new(GeneratorSpec::new(1, 1, 16, 4).with_depth(2)).unwrap();
        let colorizer = Generator::new(GeneratorSpec::new(1, 3, 16, 4).with_depth(2)).unwrap();
        let d_img = Discriminator::new(DiscriminatorSpec::for_image(1, 8, 4)).unwrap();
        let d_feat = Discriminator::new(DiscriminatorSpec::for_image(3, 8, 4)).unwrap();
        let mut params = Vec::new();
        for k in 0..8 {
            let p = match k {
                G2N | N2G => translator.init_params(&mut r),
                FN | FG => colorizer.init_params(&mut r),
                DNI | DGI => d_img.init_params(&mut r),
                _ => d_feat.init_params(&mut r),
            };
            params.push(widen(p));
        }
        Mini {
            translator,
            colorizer,
            d_img,
            d_feat,
            params,
            x_n: uniform(&mut r, [2, 1, 8, 8], 0.0, 1.0),
            x_g: uniform(&mut r, [2, 1, 8, 8], 0.0, 1.0),
            rgb_n: uniform(&mut r, [2, 3, 8, 8], 0.0, 1.0),
            rgb_g: uniform(&mut r, [2, 3, 8, 8], 0.0, 1.0),
        }
    }
}

pub struct GradResult {
    pub name: &'static str,
    pub check: GradCheck,
}

type Build = fn(&Ctx, &mut Graph) -> Var;

/// Runs the finite-difference comparison for every loss.
pub fn check_all(seed: u64, per_tensor: usize) -> Vec<GradResult> {
    let cases: [(&'static str, &[usize], Build); 8] = [
        ("pair_loss", &[G2N, N2G, FN, FG], |c, g| c.pair(g)),
        ("bilateral_consistency_loss", &[G2N, N2G, FN, FG], |c, g| {
            c.blt(g)
        }),
        ("gan_loss_d (image)", &[G2N, DNI], |c, g| c.gan_d_img(g)),
        ("gan_loss_d (feature)", &[N2G, FG, DGF], |c, g| {
            c.gan_d_feat(g)
        }),
        (
            "gan_loss_g",
            &[G2N, N2G, FN, FG, DNI, DNF, DGI, DGF],
            |c, g| {
                let t = c.gan_g_terms(g);
                let a = g.add(t[0], t[1]).unwrap();
                let b = g.add(t[2], t[3]).unwrap();
                g.add(a, b).unwrap()
            },
        ),
        ("cycle_loss", &[G2N, N2G], |c, g| c.cyc(g)),
        ("identity_loss", &[G2N, N2G], |c, g| c.idt(g)),
        (
            "total_loss",
            &[G2N, N2G, FN, FG, DNI, DNF, DGI, DGF],
            |c, g| c.total(g),
        ),
    ];
    let mut mini = Mini::new(seed);
    let mut out = Vec::new();
    for (i, (name, which, build)) in cases.into_iter().enumerate() {
        let mut params = std::mem::take(&mut mini.params);
        let check = {
            let m = &mini;
            let f = move |g: &mut Graph, b: &[Bound]| build(&Ctx { m, b }, g);
            gradient_check(
                &mut params,
                which,
                &f,
                per_tensor,
                STEP,
                FLOOR,
                seed + i as u64,
            )
        };
        mini.params = params;
        out.push(GradResult { name, check });
    }
    out
}

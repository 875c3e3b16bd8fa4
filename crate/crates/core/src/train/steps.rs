//! One optimization step per objective.
//!
//! Every step first runs the generators, then updates the discriminators on
//! detached generator outputs, then scores those outputs with the updated
//! discriminators held constant and updates the generators.

use rand::Rng;

use crate::autograd::{Gradients, Graph, Var};
use crate::data::{AugmentConfig, AugmentPlan, Batch, Dataset, GrayRef};
use crate::error::{Error, Result};
use crate::losses::{self, LossBreakdown, LossWeights, PairTerms, TranslationTerms};
use crate::nets::{Bound, ModelBundle, NetId};
use crate::tensor::Tensor;
use crate::train::adam::adam_step;
use crate::train::checkpoint::Checkpoint;

/// Stacked tensors of one batch after augmentation.
#[derive(Clone, Debug)]
pub struct BatchData {
    /// `[B, 1, H, W]` NIR inputs.
    pub nir: Tensor,
    /// `[B, 3, H, W]` RGB ground truth of `nir`.
    pub nir_rgb: Tensor,
    /// `[B, 1, H, W]` grayscale inputs.
    pub gray: Tensor,
    /// `[B, 3, H, W]` RGB ground truth of `gray`.
    pub gray_rgb: Tensor,
}

impl BatchData {
    /// Draws one augmentation per sample and stacks the results.
    pub fn load<R: Rng + ?Sized>(
        data: &Dataset,
        batch: &Batch,
        aug: &AugmentConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let mut nir = Vec::with_capacity(batch.paired.len());
        let mut nir_rgb = Vec::with_capacity(batch.paired.len());
        for &i in &batch.paired {
            let s = &data.paired[i];
            let plan = AugmentPlan::draw(rng, aug, s.nir().height(), s.nir().width())?;
            let s = plan.apply_paired(s)?;
            nir.push(s.nir().tensor().clone());
            nir_rgb.push(s.rgb().tensor().clone());
        }
        let mut gray = Vec::with_capacity(batch.gray.len());
        let mut gray_rgb = Vec::with_capacity(batch.gray.len());
        for r in &batch.gray {
            let s = match *r {
                GrayRef::GrayOnly(i) => data.gray_only[i].clone(),
                GrayRef::Paired(i) => data.paired[i].to_gray_sample(),
            };
            let plan = AugmentPlan::draw(rng, aug, s.rgb().height(), s.rgb().width())?;
            let s = plan.apply_gray(&s)?;
            gray.push(s.gray().tensor().clone());
            gray_rgb.push(s.rgb().tensor().clone());
        }
        let stack = |v: &[Tensor]| Tensor::stack(&v.iter().collect::<Vec<_>>());
        Ok(BatchData {
            nir: stack(&nir)?,
            nir_rgb: stack(&nir_rgb)?,
            gray: stack(&gray)?,
            gray_rgb: stack(&gray_rgb)?,
        })
    }
}

/// What a step optimizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Objective {
    /// Translators and image discriminators.
    Translation,
    /// Both colorizers and feature discriminators on frozen translators.
    Colorization,
    /// All eight networks with the full objective.
    Joint,
    /// NIR colorizer and its feature discriminator on frozen translators.
    Partial,
    /// One colorizer on its direct pair term.
    Standalone(NetId),
}

/// Networks placed on one graph.
struct Binder {
    bound: Vec<Option<Bound>>,
    /// Step number reported when a generator output is non-finite.
    step: u64,
}

impl Binder {
    fn new(ck: &Checkpoint) -> Self {
        Binder {
            bound: vec![None; 8],
            step: ck.step + 1,
        }
    }

    fn bind(&mut self, g: &mut Graph, bundle: &ModelBundle, ids: &[NetId], trainable: bool) {
        for &id in ids {
            self.bound[id.index()] = Some(bundle.params(id).bind(g, trainable));
        }
    }

    fn get(&self, id: NetId) -> &Bound {
        self.bound[id.index()]
            .as_ref()
            .expect("network bound before use")
    }

    fn gen(&self, g: &mut Graph, bundle: &ModelBundle, id: NetId, x: Var) -> Result<Var> {
        let y = bundle.generator(id).forward(g, self.get(id), x)?;
        if !g.value(y).is_finite() {
            return Err(Error::Diverged {
                component: format!("{} output", id.name()),
                step: self.step,
            });
        }
        Ok(y)
    }

    fn disc(&self, g: &mut Graph, bundle: &ModelBundle, id: NetId, x: Var) -> Result<Var> {
        bundle.discriminator(id).forward(g, self.get(id), x)
    }

    fn grads(&self, grads: &mut Gradients, g: &Graph, id: NetId) -> Vec<Tensor> {
        self.get(id)
            .vars()
            .iter()
            .map(|&v| {
                grads
                    .take(v)
                    .unwrap_or_else(|| Tensor::zeros(g.value(v).shape()))
            })
            .collect()
    }
}

fn apply_updates(ck: &mut Checkpoint, updates: Vec<(NetId, Vec<Tensor>)>, lr: f64) -> Result<()> {
    // Check everything first so a failure leaves all networks untouched.
    for (id, grads) in &updates {
        if !grads.iter().all(Tensor::is_finite) {
            return Err(Error::Diverged {
                component: format!("{} gradient", id.name()),
                step: ck.step + 1,
            });
        }
    }
    for (id, grads) in updates {
        adam_step(
            ck.bundle.params_mut(id),
            &grads,
            &mut ck.optim[id.index()],
            lr,
            id.name(),
        )?;
    }
    Ok(())
}

fn check_finite(b: &LossBreakdown, step: u64) -> Result<()> {
    match b.first_non_finite() {
        Some(component) => Err(Error::Diverged {
            component: component.to_string(),
            step,
        }),
        None => Ok(()),
    }
}

/// Updates each listed discriminator on `(real, fake)` and returns its loss.
fn discriminator_step(
    ck: &mut Checkpoint,
    items: &[(NetId, &Tensor, &Tensor)],
    lr: f64,
) -> Result<Vec<f64>> {
    let mut g = Graph::new();
    let mut b = Binder::new(ck);
    let ids: Vec<NetId> = items.iter().map(|it| it.0).collect();
    b.bind(&mut g, &ck.bundle, &ids, true);
    let mut values = Vec::with_capacity(items.len());
    let mut total: Option<Var> = None;
    for &(id, real, fake) in items {
        let r = g.constant(real.clone());
        let f = g.constant(fake.clone());
        let rs = b.disc(&mut g, &ck.bundle, id, r)?;
        let fs = b.disc(&mut g, &ck.bundle, id, f)?;
        let loss = losses::gan_loss_d(&mut g, rs, fs)?;
        let v = g.scalar(loss);
        if !v.is_finite() {
            return Err(Error::Diverged {
                component: id.name().to_string(),
                step: ck.step + 1,
            });
        }
        values.push(v);
        total = Some(match total {
            Some(t) => g.add(t, loss)?,
            None => loss,
        });
    }
    let Some(total) = total else {
        return Ok(values);
    };
    let mut grads = g.backward(total);
    let updates = ids
        .iter()
        .map(|&id| (id, b.grads(&mut grads, &g, id)))
        .collect();
    apply_updates(ck, updates, lr)?;
    Ok(values)
}

/// Runs one step of `objective` and returns its loss values.
pub fn train_step(
    ck: &mut Checkpoint,
    bd: &BatchData,
    objective: Objective,
    lr: f64,
) -> Result<LossBreakdown> {
    let out = match objective {
        Objective::Translation => translation_step(ck, bd, lr),
        Objective::Colorization => colorization_step(ck, bd, lr, false),
        Objective::Joint => colorization_step(ck, bd, lr, true),
        Objective::Partial => partial_step(ck, bd, lr),
        Objective::Standalone(id) => standalone_step(ck, bd, lr, id),
    }?;
    ck.step += 1;
    Ok(out)
}

/// Weights with the consistency term removed when it is excluded.
fn effective_weights(ck: &Checkpoint) -> (LossWeights, bool) {
    let excluded = ck.config.ablation == crate::train::Ablation::NoBlt;
    let mut w = ck.config.weights;
    if excluded {
        w.lambda_c = 0.0;
    }
    (w, excluded)
}

struct Finish {
    total: Var,
    breakdown: LossBreakdown,
    nets: &'static [NetId],
}

fn finish(ck: &mut Checkpoint, g: Graph, b: &Binder, f: Finish, lr: f64) -> Result<LossBreakdown> {
    check_finite(&f.breakdown, ck.step + 1)?;
    let mut grads = g.backward(f.total);
    let updates = f
        .nets
        .iter()
        .map(|&id| (id, b.grads(&mut grads, &g, id)))
        .collect();
    apply_updates(ck, updates, lr)?;
    Ok(f.breakdown)
}

fn translation_step(ck: &mut Checkpoint, bd: &BatchData, lr: f64) -> Result<LossBreakdown> {
    use NetId::*;
    let w = ck.config.weights;
    let mut g = Graph::new();
    let mut b = Binder::new(ck);
    b.bind(&mut g, &ck.bundle, &[G2N, N2G], true);
    let xn = g.constant(bd.nir.clone());
    let xg = g.constant(bd.gray.clone());
    let fake_n = b.gen(&mut g, &ck.bundle, G2N, xg)?;
    let fake_g = b.gen(&mut g, &ck.bundle, N2G, xn)?;

    let d = discriminator_step(
        ck,
        &[
            (DNImg, &bd.nir, g.value(fake_n)),
            (DGImg, &bd.gray, g.value(fake_g)),
        ],
        lr,
    )?;
    b.bind(&mut g, &ck.bundle, &[DNImg, DGImg], false);
    let bundle = &ck.bundle;

    let s = b.disc(&mut g, bundle, DNImg, fake_n)?;
    let gan_img_n = losses::gan_loss_g(&mut g, s)?;
    let s = b.disc(&mut g, bundle, DGImg, fake_g)?;
    let gan_img_g = losses::gan_loss_g(&mut g, s)?;
    let g_back = b.gen(&mut g, bundle, N2G, fake_n)?;
    let n_back = b.gen(&mut g, bundle, G2N, fake_g)?;
    let cyc = losses::cycle_loss(&mut g, g_back, xg, n_back, xn)?;
    let n2g_g = b.gen(&mut g, bundle, N2G, xg)?;
    let g2n_n = b.gen(&mut g, bundle, G2N, xn)?;
    let idt = losses::identity_loss(&mut g, n2g_g, xg, g2n_n, xn)?;
    let zero = losses::zero(&mut g);
    let terms = TranslationTerms {
        gan_img_n,
        gan_feat_n: zero,
        gan_img_g,
        gan_feat_g: zero,
        cyc,
        idt,
    };
    let tran = losses::translation_loss(&mut g, &terms, &w)?;
    let total = losses::total_loss(&mut g, tran, zero, zero, &w)?;
    let breakdown = LossBreakdown {
        gan_img_n: g.scalar(gan_img_n),
        gan_img_g: g.scalar(gan_img_g),
        cyc: g.scalar(cyc),
        idt: g.scalar(idt),
        tran: g.scalar(tran),
        total: g.scalar(total),
        d_img_n: d[0],
        d_img_g: d[1],
        blt_excluded: effective_weights(ck).1,
        ..Default::default()
    };
    let f = Finish {
        total,
        breakdown,
        nets: &[G2N, N2G],
    };
    finish(ck, g, &b, f, lr)
}

/// Both colorizers; with `joint` the translators are trained too and all
/// translation terms are included.
fn colorization_step(
    ck: &mut Checkpoint,
    bd: &BatchData,
    lr: f64,
    joint: bool,
) -> Result<LossBreakdown> {
    use NetId::*;
    let (w, blt_excluded) = effective_weights(ck);
    let mut g = Graph::new();
    let mut b = Binder::new(ck);
    b.bind(&mut g, &ck.bundle, &[FN, FG], true);
    b.bind(&mut g, &ck.bundle, &[G2N, N2G], joint);
    let xn = g.constant(bd.nir.clone());
    let xg = g.constant(bd.gray.clone());
    let gt_n = g.constant(bd.nir_rgb.clone());
    let gt_g = g.constant(bd.gray_rgb.clone());

    let (fake_n, fake_g) = {
        let bundle = &ck.bundle;
        let fake_n = b.gen(&mut g, bundle, G2N, xg)?;
        let fake_g = b.gen(&mut g, bundle, N2G, xn)?;
        (fake_n, fake_g)
    };
    let bundle = &ck.bundle;
    let n2c = b.gen(&mut g, bundle, FN, xn)?;
    let g2n2c = b.gen(&mut g, bundle, FN, fake_n)?;
    let g2c = b.gen(&mut g, bundle, FG, xg)?;
    let n2g2c = b.gen(&mut g, bundle, FG, fake_g)?;

    let mut items = vec![
        (DNFeat, g.value(n2c), g.value(g2n2c)),
        (DGFeat, g.value(g2c), g.value(n2g2c)),
    ];
    if joint {
        items.push((DNImg, &bd.nir, g.value(fake_n)));
        items.push((DGImg, &bd.gray, g.value(fake_g)));
    }
    let d = discriminator_step(ck, &items, lr)?;
    let dis: &[NetId] = if joint {
        &[DNFeat, DGFeat, DNImg, DGImg]
    } else {
        &[DNFeat, DGFeat]
    };
    b.bind(&mut g, &ck.bundle, dis, false);
    let bundle = &ck.bundle;

    let s = b.disc(&mut g, bundle, DNFeat, g2n2c)?;
    let gan_feat_n = losses::gan_loss_g(&mut g, s)?;
    let s = b.disc(&mut g, bundle, DGFeat, n2g2c)?;
    let gan_feat_g = losses::gan_loss_g(&mut g, s)?;
    let zero = losses::zero(&mut g);
    let (gan_img_n, gan_img_g, cyc, idt) = if joint {
        let s = b.disc(&mut g, bundle, DNImg, fake_n)?;
        let gan_img_n = losses::gan_loss_g(&mut g, s)?;
        let s = b.disc(&mut g, bundle, DGImg, fake_g)?;
        let gan_img_g = losses::gan_loss_g(&mut g, s)?;
        let g_back = b.gen(&mut g, bundle, N2G, fake_n)?;
        let n_back = b.gen(&mut g, bundle, G2N, fake_g)?;
        let cyc = losses::cycle_loss(&mut g, g_back, xg, n_back, xn)?;
        let n2g_g = b.gen(&mut g, bundle, N2G, xg)?;
        let g2n_n = b.gen(&mut g, bundle, G2N, xn)?;
        let idt = losses::identity_loss(&mut g, n2g_g, xg, g2n_n, xn)?;
        (gan_img_n, gan_img_g, cyc, idt)
    } else {
        (zero, zero, zero, zero)
    };

    let pair = losses::pair_loss(
        &mut g,
        &PairTerms {
            out_g_direct: g2c,
            out_g_latent: n2g2c,
            out_n_direct: n2c,
            out_n_latent: g2n2c,
            gt_gray_rgb: gt_g,
            gt_nir_rgb: gt_n,
        },
        &w,
    )?;
    let blt = if blt_excluded {
        let [a, bb, c, e] = [n2c, n2g2c, g2c, g2n2c].map(|v| g.detach(v));
        losses::bilateral_consistency_loss(&mut g, a, bb, c, e)?
    } else {
        losses::bilateral_consistency_loss(&mut g, n2c, n2g2c, g2c, g2n2c)?
    };
    let terms = TranslationTerms {
        gan_img_n,
        gan_feat_n,
        gan_img_g,
        gan_feat_g,
        cyc,
        idt,
    };
    let tran = losses::translation_loss(&mut g, &terms, &w)?;
    let total = losses::total_loss(&mut g, tran, pair, blt, &w)?;
    let mut breakdown = LossBreakdown {
        pair: g.scalar(pair),
        blt: g.scalar(blt),
        gan_img_n: g.scalar(gan_img_n),
        gan_feat_n: g.scalar(gan_feat_n),
        gan_img_g: g.scalar(gan_img_g),
        gan_feat_g: g.scalar(gan_feat_g),
        cyc: g.scalar(cyc),
        idt: g.scalar(idt),
        tran: g.scalar(tran),
        total: g.scalar(total),
        d_feat_n: d[0],
        d_feat_g: d[1],
        blt_excluded,
        ..Default::default()
    };
    if joint {
        breakdown.d_img_n = d[2];
        breakdown.d_img_g = d[3];
    }
    let nets: &'static [NetId] = if joint {
        &[G2N, N2G, FN, FG]
    } else {
        &[FN, FG]
    };
    finish(
        ck,
        g,
        &b,
        Finish {
            total,
            breakdown,
            nets,
        },
        lr,
    )
}

fn partial_step(ck: &mut Checkpoint, bd: &BatchData, lr: f64) -> Result<LossBreakdown> {
    use NetId::*;
    let w = ck.config.weights;
    let mut g = Graph::new();
    let mut b = Binder::new(ck);
    b.bind(&mut g, &ck.bundle, &[FN], true);
    b.bind(&mut g, &ck.bundle, &[G2N], false);
    let xn = g.constant(bd.nir.clone());
    let xg = g.constant(bd.gray.clone());
    let gt_n = g.constant(bd.nir_rgb.clone());
    let gt_g = g.constant(bd.gray_rgb.clone());
    let bundle = &ck.bundle;
    let fake_n = b.gen(&mut g, bundle, G2N, xg)?;
    let n2c = b.gen(&mut g, bundle, FN, xn)?;
    let g2n2c = b.gen(&mut g, bundle, FN, fake_n)?;

    let d = discriminator_step(ck, &[(DNFeat, g.value(n2c), g.value(g2n2c))], lr)?;
    b.bind(&mut g, &ck.bundle, &[DNFeat], false);
    let s = b.disc(&mut g, &ck.bundle, DNFeat, g2n2c)?;
    let gan_feat_n = losses::gan_loss_g(&mut g, s)?;

    let direct = losses::l1(&mut g, gt_n, n2c)?;
    let latent = losses::l1(&mut g, gt_g, g2n2c)?;
    let latent = g.scale(latent, w.lambda4);
    let pair = g.add(direct, latent)?;
    let zero = losses::zero(&mut g);
    let terms = TranslationTerms {
        gan_img_n: zero,
        gan_feat_n,
        gan_img_g: zero,
        gan_feat_g: zero,
        cyc: zero,
        idt: zero,
    };
    let tran = losses::translation_loss(&mut g, &terms, &w)?;
    let total = losses::total_loss(&mut g, tran, pair, zero, &w)?;
    let breakdown = LossBreakdown {
        pair: g.scalar(pair),
        gan_feat_n: g.scalar(gan_feat_n),
        tran: g.scalar(tran),
        total: g.scalar(total),
        d_feat_n: d[0],
        ..Default::default()
    };
    finish(
        ck,
        g,
        &b,
        Finish {
            total,
            breakdown,
            nets: &[FN],
        },
        lr,
    )
}

fn standalone_step(
    ck: &mut Checkpoint,
    bd: &BatchData,
    lr: f64,
    id: NetId,
) -> Result<LossBreakdown> {
    let w = ck.config.weights;
    let mut g = Graph::new();
    let mut b = Binder::new(ck);
    b.bind(&mut g, &ck.bundle, &[id], true);
    let (x, gt, nets): (_, _, &'static [NetId]) = match id {
        NetId::FN => (&bd.nir, &bd.nir_rgb, &[NetId::FN]),
        NetId::FG => (&bd.gray, &bd.gray_rgb, &[NetId::FG]),
        other => {
            return Err(Error::InvalidConfig(format!(
                "{} is not a colorizer",
                other.name()
            )))
        }
    };
    let x = g.constant(x.clone());
    let gt = g.constant(gt.clone());
    let out = b.gen(&mut g, &ck.bundle, id, x)?;
    let pair = losses::l1(&mut g, gt, out)?;
    let zero = losses::zero(&mut g);
    let total = losses::total_loss(&mut g, zero, pair, zero, &w)?;
    let breakdown = LossBreakdown {
        pair: g.scalar(pair),
        total: g.scalar(total),
        ..Default::default()
    };
    finish(
        ck,
        g,
        &b,
        Finish {
            total,
            breakdown,
            nets,
        },
        lr,
    )
}

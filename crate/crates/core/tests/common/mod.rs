//! Reference implementations written directly from the metric and loss
//! definitions, sharing no code with the library.
#![allow(dead_code)]

use nircolor::autograd::{Graph, Var};
use nircolor::nets::{Bound, Params};
use nircolor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, shape: [usize; 4], lo: f64, hi: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

/// `clamp(a + noise)`, correlated with `a` so SSIM terms stay in a realistic range.
pub fn perturbed(rng: &mut ChaCha8Rng, a: &Tensor, amp: f64) -> Tensor {
    let d = a
        .data()
        .iter()
        .map(|&v| (v + rng.random_range(-amp..amp)).clamp(0.0, 1.0))
        .collect();
    Tensor::from_vec(a.shape(), d).unwrap()
}

/// Scales weights by 10. At the training init (std 0.02) small networks
/// produce nearly constant maps, where instance norm is dominated by its
/// epsilon and finite differences lose accuracy.
pub fn widen(p: Params) -> Params {
    let names = p.names().to_vec();
    let ts = p.tensors().iter().map(|t| t.map(|v| v * 10.0)).collect();
    Params::from_parts(names, ts).unwrap()
}

pub fn oracle_psnr(a: &[f64], b: &[f64]) -> f64 {
    let mse = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64;
    if mse == 0.0 {
        99.0
    } else {
        (-10.0 * mse.log10()).min(99.0)
    }
}

/// Mean angle in degrees via the normalized dot product.
pub fn oracle_ae(a: &[f64], b: &[f64], hw: usize) -> f64 {
    let mut total = 0.0;
    for i in 0..hw {
        let p = [a[i], a[hw + i], a[2 * hw + i]];
        let q = [b[i], b[hw + i], b[2 * hw + i]];
        let np = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        let nq = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]).sqrt();
        if np == 0.0 || nq == 0.0 {
            continue;
        }
        let cos = (p[0] * q[0] + p[1] * q[1] + p[2] * q[2]) / (np * nq);
        total += cos.clamp(-1.0, 1.0).acos().to_degrees();
    }
    total / hw as f64
}

/// Full 2-D Gaussian window normalized over its area.
pub fn window2d(len: usize, sigma: f64) -> Vec<Vec<f64>> {
    let c = (len / 2) as f64;
    let mut w: Vec<Vec<f64>> = (0..len)
        .map(|y| {
            (0..len)
                .map(|x| {
                    let (dy, dx) = (y as f64 - c, x as f64 - c);
                    (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()
                })
                .collect()
        })
        .collect();
    let s: f64 = w.iter().flatten().sum();
    w.iter_mut().flatten().for_each(|v| *v /= s);
    w
}

/// Mean SSIM and mean contrast-structure over valid window positions of one plane.
pub fn oracle_ssim_cs(a: &[f64], b: &[f64], h: usize, w: usize, win: &[Vec<f64>]) -> (f64, f64) {
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let k = win.len();
    let (oh, ow) = (h - k + 1, w - k + 1);
    let (mut ssim, mut cs) = (0.0, 0.0);
    for y in 0..oh {
        for x in 0..ow {
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (dy, row) in win.iter().enumerate() {
                for (dx, &wt) in row.iter().enumerate() {
                    let i = (y + dy) * w + x + dx;
                    ma += wt * a[i];
                    mb += wt * b[i];
                    saa += wt * a[i] * a[i];
                    sbb += wt * b[i] * b[i];
                    sab += wt * a[i] * b[i];
                }
            }
            let (va, vb, cov) = (saa - ma * ma, sbb - mb * mb, sab - ma * mb);
            let l = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
            let s = (2.0 * cov + c2) / (va + vb + c2);
            ssim += l * s;
            cs += s;
        }
    }
    let n = (oh * ow) as f64;
    (ssim / n, cs / n)
}

/// Single-scale SSIM of `[c, h, w]` images averaged over channels.
pub fn oracle_ssim(a: &[f64], b: &[f64], c: usize, h: usize, w: usize) -> f64 {
    let win = window2d(11, 1.5);
    let hw = h * w;
    (0..c)
        .map(|ch| {
            oracle_ssim_cs(
                &a[ch * hw..(ch + 1) * hw],
                &b[ch * hw..(ch + 1) * hw],
                h,
                w,
                &win,
            )
            .0
        })
        .sum::<f64>()
        / c as f64
}

fn halve(p: &[f64], h: usize, w: usize) -> Vec<f64> {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(oh * ow);
    for y in 0..oh {
        for x in 0..ow {
            out.push(
                (p[2 * y * w + 2 * x]
                    + p[2 * y * w + 2 * x + 1]
                    + p[(2 * y + 1) * w + 2 * x]
                    + p[(2 * y + 1) * w + 2 * x + 1])
                    / 4.0,
            );
        }
    }
    out
}

/// Multi-scale SSIM of a `[n, c, h, w]` pair, averaged over planes.
pub fn oracle_ms_ssim(a: &Tensor, b: &Tensor) -> f64 {
    const W: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];
    let [n, c, h, w] = a.shape();
    let side = h.min(w);
    let scales = if side < 11 {
        1
    } else {
        ((side as f64 / 11.0).log2().floor() as usize + 1).min(5)
    };
    let coarsest = side >> (scales - 1);
    let len = if coarsest >= 11 {
        11
    } else if coarsest % 2 == 1 {
        coarsest
    } else {
        coarsest - 1
    };
    let win = window2d(len, 1.5);
    let total: f64 = W[..scales].iter().sum();
    let hw = h * w;
    let mut acc = 0.0;
    for plane in 0..n * c {
        let mut pa = a.data()[plane * hw..(plane + 1) * hw].to_vec();
        let mut pb = b.data()[plane * hw..(plane + 1) * hw].to_vec();
        let (mut ph, mut pw) = (h, w);
        let mut prod = 1.0;
        for (s, wt) in W[..scales].iter().enumerate() {
            let (ssim, cs) = oracle_ssim_cs(&pa, &pb, ph, pw, &win);
            let v = if s + 1 == scales { ssim } else { cs };
            prod *= v.max(0.0).powf(wt / total);
            pa = halve(&pa, ph, pw);
            pb = halve(&pb, ph, pw);
            ph /= 2;
            pw /= 2;
        }
        acc += prod;
    }
    acc / (n * c) as f64
}

pub fn oracle_l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

pub fn oracle_mix(a: &Tensor, b: &Tensor) -> f64 {
    0.84 * (1.0 - oracle_ms_ssim(a, b)) + 0.16 * oracle_l1(a.data(), b.data())
}

/// Builds a scalar loss from parameter sets bound on a fresh graph.
pub type LossFn<'a> = dyn Fn(&mut Graph, &[Bound]) -> Var + 'a;

fn eval_loss(params: &[Params], f: &LossFn) -> f64 {
    let mut g = Graph::new();
    let bound: Vec<Bound> = params.iter().map(|p| p.bind(&mut g, false)).collect();
    let out = f(&mut g, &bound);
    g.scalar(out)
}

pub struct GradCheck {
    pub worst: f64,
    pub checked: usize,
    /// Entries whose step straddled a kink (abs, relu), where the two
    /// one-sided differences disagree and no derivative exists to compare.
    pub skipped: usize,
}

/// Worst relative error between analytic gradients and central differences
/// (step `h`) over `per_tensor` random entries of every tensor in `which`.
/// Relative errors use `max(|analytic|, |numeric|, floor)` as denominator.
pub fn gradient_check(
    params: &mut [Params],
    which: &[usize],
    f: &LossFn,
    per_tensor: usize,
    h: f64,
    floor: f64,
    seed: u64,
) -> GradCheck {
    let mut g = Graph::new();
    let bound: Vec<Bound> = params.iter().map(|p| p.bind(&mut g, true)).collect();
    let out = f(&mut g, &bound);
    let f0 = g.scalar(out);
    let grads = g.backward(out);
    let mut r = rng(seed);
    let mut res = GradCheck {
        worst: 0.0,
        checked: 0,
        skipped: 0,
    };
    for &k in which {
        for t in 0..params[k].len() {
            let var = bound[k].vars()[t];
            let shape = params[k].tensors()[t].shape();
            let analytic = grads.get_or_zeros(var, shape);
            let n = analytic.numel();
            for _ in 0..per_tensor.min(n) {
                let e = r.random_range(0..n);
                let orig = params[k].tensors()[t].data()[e];
                params[k].tensors_mut()[t].data_mut()[e] = orig + h;
                let up = eval_loss(params, f);
                params[k].tensors_mut()[t].data_mut()[e] = orig - h;
                let down = eval_loss(params, f);
                params[k].tensors_mut()[t].data_mut()[e] = orig;
                let (fwd, bwd) = ((up - f0) / h, (f0 - down) / h);
                if (fwd - bwd).abs() > 1e-3 * fwd.abs().max(bwd.abs()).max(floor) {
                    res.skipped += 1;
                    continue;
                }
                let numeric = (up - down) / (2.0 * h);
                let a = analytic.data()[e];
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
                res.worst = res.worst.max(rel);
                res.checked += 1;
            }
        }
    }
    res
}

pub mod fixed;
pub mod grad;
pub mod metric;
pub mod phases;

//! A small reverse-mode automatic differentiation tape over [`Tensor`]s.
//!
//! Nodes are appended in evaluation order, so a single reverse sweep over the
//! node list visits every node after all of its consumers. Nodes that do not
//! depend on any trainable leaf are never visited by the sweep.

use crate::error::{Error, Result};
use crate::kernels::{self, col2im, gemm, im2col, ConvGeom, Mat};
use crate::tensor::{Shape, Tensor};

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

const NORM_EPS: f64 = 1e-5;

enum Op {
    Leaf,
    Conv2d {
        x: Var,
        w: Var,
        b: Var,
        geom: ConvGeom,
        cols: Vec<f64>,
    },
    ConvTranspose2d {
        x: Var,
        w: Var,
        b: Var,
        /// Geometry of the equivalent forward convolution from output to input.
        geom: ConvGeom,
    },
    InstanceNorm {
        x: Var,
        inv_std: Vec<f64>,
    },
    LeakyRelu {
        x: Var,
        slope: f64,
    },
    Sigmoid {
        x: Var,
    },
    Concat {
        a: Var,
        b: Var,
    },
    Add {
        a: Var,
        b: Var,
    },
    Sub {
        a: Var,
        b: Var,
    },
    Mul {
        a: Var,
        b: Var,
    },
    Div {
        a: Var,
        b: Var,
    },
    Affine {
        x: Var,
        scale: f64,
    },
    Abs {
        x: Var,
    },
    Square {
        x: Var,
    },
    Mean {
        x: Var,
    },
    SpatialMean {
        x: Var,
    },
    PowPositive {
        x: Var,
        exponent: f64,
    },
    BlurValid {
        x: Var,
        taps: Vec<f64>,
    },
    AvgPool2 {
        x: Var,
    },
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Graph::backward`], indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Gradient of `v`, or zeros of `shape` when `v` did not influence the loss.
    pub fn get_or_zeros(&self, v: Var, shape: Shape) -> Tensor {
        self.get(v).cloned().unwrap_or_else(|| Tensor::zeros(shape))
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// A leaf that is not differentiated.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// A leaf whose gradient is tracked.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.rg(v)
    }

    /// Copies the value of `v` into a fresh constant, cutting gradient flow.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.nodes[v.0].value.clone();
        self.constant(value)
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v).item()
    }

    /// 2-D convolution. `w` is `[out, in, k, k]`, `b` is `[1, out, 1, 1]`.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Var, stride: usize, pad: usize) -> Result<Var> {
        let [n, ci, h, wd] = self.value(x).shape();
        let [co, wci, k, k2] = self.value(w).shape();
        if wci != ci || k != k2 {
            return Err(Error::ShapeMismatch {
                op: "conv2d",
                left: self.value(x).shape(),
                right: self.value(w).shape(),
            });
        }
        if self.value(b).shape() != [1, co, 1, 1] {
            return Err(Error::ShapeMismatch {
                op: "conv2d bias",
                left: [1, co, 1, 1],
                right: self.value(b).shape(),
            });
        }
        if h + 2 * pad < k || wd + 2 * pad < k {
            return Err(Error::TooSmall(format!(
                "{h}x{wd} input for a {k}x{k} convolution"
            )));
        }
        let geom = ConvGeom {
            channels: ci,
            height: h,
            width: wd,
            kernel: k,
            stride,
            pad,
        };
        let (rows, ncols) = (geom.col_rows(), geom.col_cols());
        let mut cols = vec![0.0; n * rows * ncols];
        let mut out = Tensor::zeros([n, co, geom.out_height(), geom.out_width()]);
        {
            let xv = &self.nodes[x.0].value;
            let wv = self.nodes[w.0].value.data();
            let bv = self.nodes[b.0].value.data();
            let out_len = co * ncols;
            for s in 0..n {
                let c = &mut cols[s * rows * ncols..(s + 1) * rows * ncols];
                im2col(xv.sample(s), geom, c);
                let y = &mut out.data_mut()[s * out_len..(s + 1) * out_len];
                for (o, chunk) in y.chunks_mut(ncols).enumerate() {
                    chunk.fill(bv[o]);
                }
                gemm(Mat::new(wv, co, rows), Mat::new(c, rows, ncols), 1.0, y);
            }
        }
        let rg = self.rg(x) || self.rg(w) || self.rg(b);
        Ok(self.push(
            out,
            Op::Conv2d {
                x,
                w,
                b,
                geom,
                cols,
            },
            rg,
        ))
    }

    /// Transposed 2-D convolution. `w` is `[in, out, k, k]`, `b` is `[1, out, 1, 1]`.
    pub fn conv_transpose2d(
        &mut self,
        x: Var,
        w: Var,
        b: Var,
        stride: usize,
        pad: usize,
    ) -> Result<Var> {
        let [n, ci, h, wd] = self.value(x).shape();
        let [wci, co, k, k2] = self.value(w).shape();
        if wci != ci || k != k2 {
            return Err(Error::ShapeMismatch {
                op: "conv_transpose2d",
                left: self.value(x).shape(),
                right: self.value(w).shape(),
            });
        }
        if self.value(b).shape() != [1, co, 1, 1] {
            return Err(Error::ShapeMismatch {
                op: "conv_transpose2d bias",
                left: [1, co, 1, 1],
                right: self.value(b).shape(),
            });
        }
        let oh = (h - 1) * stride + k - 2 * pad;
        let ow = (wd - 1) * stride + k - 2 * pad;
        let geom = ConvGeom {
            channels: co,
            height: oh,
            width: ow,
            kernel: k,
            stride,
            pad,
        };
        debug_assert_eq!((geom.out_height(), geom.out_width()), (h, wd));
        let rows = geom.col_rows();
        let hw = h * wd;
        let mut out = Tensor::zeros([n, co, oh, ow]);
        {
            let xv = &self.nodes[x.0].value;
            let wv = self.nodes[w.0].value.data();
            let bv = self.nodes[b.0].value.data();
            let mut cols = vec![0.0; rows * hw];
            let out_len = co * oh * ow;
            for s in 0..n {
                gemm(
                    Mat::t(wv, ci, rows),
                    Mat::new(xv.sample(s), ci, hw),
                    0.0,
                    &mut cols,
                );
                let y = &mut out.data_mut()[s * out_len..(s + 1) * out_len];
                for (o, chunk) in y.chunks_mut(oh * ow).enumerate() {
                    chunk.fill(bv[o]);
                }
                col2im(&cols, geom, y);
            }
        }
        let rg = self.rg(x) || self.rg(w) || self.rg(b);
        Ok(self.push(out, Op::ConvTranspose2d { x, w, b, geom }, rg))
    }

    /// Per-sample, per-channel normalization to zero mean and unit variance.
    pub fn instance_norm(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let [n, c, h, w] = xv.shape();
        let hw = h * w;
        let mut out = xv.clone();
        let mut inv_std = Vec::with_capacity(n * c);
        for plane in out.data_mut().chunks_mut(hw) {
            let mean = plane.iter().sum::<f64>() / hw as f64;
            let var = plane.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / hw as f64;
            let is = 1.0 / (var + NORM_EPS).sqrt();
            plane.iter_mut().for_each(|v| *v = (*v - mean) * is);
            inv_std.push(is);
        }
        debug_assert_eq!(inv_std.len(), n * c);
        let rg = self.rg(x);
        self.push(out, Op::InstanceNorm { x, inv_std }, rg)
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        let out = self.value(x).map(|v| if v > 0.0 { v } else { slope * v });
        let rg = self.rg(x);
        self.push(out, Op::LeakyRelu { x, slope }, rg)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.leaky_relu(x, 0.0)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| 1.0 / (1.0 + (-v).exp()));
        let rg = self.rg(x);
        self.push(out, Op::Sigmoid { x }, rg)
    }

    /// Concatenation along the channel axis.
    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let [n, ca, h, w] = av.shape();
        let [nb, cb, hb, wb] = bv.shape();
        if (n, h, w) != (nb, hb, wb) {
            return Err(Error::ShapeMismatch {
                op: "concat",
                left: av.shape(),
                right: bv.shape(),
            });
        }
        let mut data = Vec::with_capacity(n * (ca + cb) * h * w);
        for s in 0..n {
            data.extend_from_slice(av.sample(s));
            data.extend_from_slice(bv.sample(s));
        }
        let out = Tensor::from_vec([n, ca + cb, h, w], data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Concat { a, b }, rg))
    }

    fn binary(
        &mut self,
        a: Var,
        b: Var,
        name: &'static str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor> {
        let (av, bv) = (self.value(a), self.value(b));
        av.ensure_same_shape(bv, name)?;
        let data = av
            .data()
            .iter()
            .zip(bv.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        Tensor::from_vec(av.shape(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.binary(a, b, "add", |x, y| x + y)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Add { a, b }, rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.binary(a, b, "sub", |x, y| x - y)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Sub { a, b }, rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.binary(a, b, "mul", |x, y| x * y)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Mul { a, b }, rg))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.binary(a, b, "div", |x, y| x / y)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Div { a, b }, rg))
    }

    /// `scale * x + shift`.
    pub fn affine(&mut self, x: Var, scale: f64, shift: f64) -> Var {
        let out = self.value(x).map(|v| scale * v + shift);
        let rg = self.rg(x);
        self.push(out, Op::Affine { x, scale }, rg)
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        self.affine(x, s, 0.0)
    }

    pub fn abs(&mut self, x: Var) -> Var {
        let out = self.value(x).map(f64::abs);
        let rg = self.rg(x);
        self.push(out, Op::Abs { x }, rg)
    }

    pub fn square(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| v * v);
        let rg = self.rg(x);
        self.push(out, Op::Square { x }, rg)
    }

    /// Mean over every element, as a `[1, 1, 1, 1]` tensor.
    pub fn mean(&mut self, x: Var) -> Var {
        let out = Tensor::scalar(self.value(x).mean());
        let rg = self.rg(x);
        self.push(out, Op::Mean { x }, rg)
    }

    /// Mean over the spatial axes: `[n, c, h, w] -> [n, c, 1, 1]`.
    pub fn spatial_mean(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let [n, c, h, w] = xv.shape();
        let data = xv
            .data()
            .chunks(h * w)
            .map(|p| p.iter().sum::<f64>() / (h * w) as f64)
            .collect();
        let out = Tensor::from_vec([n, c, 1, 1], data).expect("spatial mean shape");
        let rg = self.rg(x);
        self.push(out, Op::SpatialMean { x }, rg)
    }

    /// `max(x, 0) ^ exponent`; the derivative is taken as zero where `x <= 0`.
    pub fn pow_positive(&mut self, x: Var, exponent: f64) -> Var {
        let out = self
            .value(x)
            .map(|v| if v > 0.0 { v.powf(exponent) } else { 0.0 });
        let rg = self.rg(x);
        self.push(out, Op::PowPositive { x, exponent }, rg)
    }

    /// Depthwise separable filtering with `taps` along both axes, no padding.
    pub fn blur_valid(&mut self, x: Var, taps: &[f64]) -> Result<Var> {
        let xv = self.value(x);
        let [n, c, h, w] = xv.shape();
        let l = taps.len();
        if h < l || w < l {
            return Err(Error::TooSmall(format!(
                "{h}x{w} plane for a {l}-tap window"
            )));
        }
        let (oh, ow) = (h + 1 - l, w + 1 - l);
        let mut out = Tensor::zeros([n, c, oh, ow]);
        for (src, dst) in xv
            .data()
            .chunks(h * w)
            .zip(out.data_mut().chunks_mut(oh * ow))
        {
            kernels::blur_plane_valid(src, h, w, taps, dst);
        }
        let rg = self.rg(x);
        Ok(self.push(
            out,
            Op::BlurValid {
                x,
                taps: taps.to_vec(),
            },
            rg,
        ))
    }

    /// 2x2 average pooling with stride 2; odd trailing rows/columns are dropped.
    pub fn avg_pool2(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        let [n, c, h, w] = xv.shape();
        if h < 2 || w < 2 {
            return Err(Error::TooSmall(format!("{h}x{w} plane for 2x2 pooling")));
        }
        let (oh, ow) = (h / 2, w / 2);
        let mut out = Tensor::zeros([n, c, oh, ow]);
        for (src, dst) in xv
            .data()
            .chunks(h * w)
            .zip(out.data_mut().chunks_mut(oh * ow))
        {
            for oy in 0..oh {
                for ox in 0..ow {
                    let i = 2 * oy * w + 2 * ox;
                    dst[oy * ow + ox] = 0.25 * (src[i] + src[i + 1] + src[i + w] + src[i + w + 1]);
                }
            }
        }
        let rg = self.rg(x);
        Ok(self.push(out, Op::AvgPool2 { x }, rg))
    }

    /// Reverse sweep from `root`, seeding with ones (the gradient of `sum(root)`).
    pub fn backward(&self, root: Var) -> Gradients {
        let mut grads: Vec<Option<Tensor>> = Vec::with_capacity(root.0 + 1);
        grads.resize_with(root.0 + 1, || None);
        if !self.rg(root) {
            return Gradients { grads };
        }
        grads[root.0] = Some(Tensor::full(self.value(root).shape(), 1.0));
        for i in (0..=root.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(gy) = grads[i].take() else { continue };
            self.backprop_node(node, &gy, &mut grads);
        }
        Gradients { grads }
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
        match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }

    fn backprop_node(&self, node: &Node, gy: &Tensor, grads: &mut [Option<Tensor>]) {
        let y = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::Conv2d {
                x,
                w,
                b,
                geom,
                cols,
            } => {
                let [n, co, oh, ow] = y.shape();
                let (rows, ncols) = (geom.col_rows(), oh * ow);
                if self.rg(*b) {
                    self.accumulate(grads, *b, channel_sums(gy, n, co, ncols));
                }
                if self.rg(*w) {
                    let mut dw = Tensor::zeros(self.value(*w).shape());
                    for s in 0..n {
                        gemm(
                            Mat::new(gy.sample(s), co, ncols),
                            Mat::t(&cols[s * rows * ncols..(s + 1) * rows * ncols], rows, ncols),
                            1.0,
                            dw.data_mut(),
                        );
                    }
                    self.accumulate(grads, *w, dw);
                }
                if self.rg(*x) {
                    let wv = self.value(*w).data();
                    let mut dx = Tensor::zeros(self.value(*x).shape());
                    let mut dcols = vec![0.0; rows * ncols];
                    let plane = geom.channels * geom.height * geom.width;
                    for s in 0..n {
                        gemm(
                            Mat::t(wv, co, rows),
                            Mat::new(gy.sample(s), co, ncols),
                            0.0,
                            &mut dcols,
                        );
                        col2im(
                            &dcols,
                            *geom,
                            &mut dx.data_mut()[s * plane..(s + 1) * plane],
                        );
                    }
                    self.accumulate(grads, *x, dx);
                }
            }
            Op::ConvTranspose2d { x, w, b, geom } => {
                let [n, co, oh, ow] = y.shape();
                let xv = self.value(*x);
                let ci = xv.channels();
                let hw = xv.height() * xv.width();
                let rows = geom.col_rows();
                if self.rg(*b) {
                    self.accumulate(grads, *b, channel_sums(gy, n, co, oh * ow));
                }
                let need_w = self.rg(*w);
                let need_x = self.rg(*x);
                if !(need_w || need_x) {
                    return;
                }
                let wv = self.value(*w).data();
                let mut dw = need_w.then(|| Tensor::zeros(self.value(*w).shape()));
                let mut dx = need_x.then(|| Tensor::zeros(xv.shape()));
                let mut dcols = vec![0.0; rows * hw];
                for s in 0..n {
                    im2col(gy.sample(s), *geom, &mut dcols);
                    if let Some(dw) = dw.as_mut() {
                        gemm(
                            Mat::new(xv.sample(s), ci, hw),
                            Mat::t(&dcols, rows, hw),
                            1.0,
                            dw.data_mut(),
                        );
                    }
                    if let Some(dx) = dx.as_mut() {
                        gemm(
                            Mat::new(wv, ci, rows),
                            Mat::new(&dcols, rows, hw),
                            0.0,
                            &mut dx.data_mut()[s * ci * hw..(s + 1) * ci * hw],
                        );
                    }
                }
                if let Some(dw) = dw {
                    self.accumulate(grads, *w, dw);
                }
                if let Some(dx) = dx {
                    self.accumulate(grads, *x, dx);
                }
            }
            Op::InstanceNorm { x, inv_std } => {
                let hw = y.height() * y.width();
                let mut dx = Tensor::zeros(y.shape());
                for (((dst, yp), gp), is) in dx
                    .data_mut()
                    .chunks_mut(hw)
                    .zip(y.data().chunks(hw))
                    .zip(gy.data().chunks(hw))
                    .zip(inv_std)
                {
                    let mean_g = gp.iter().sum::<f64>() / hw as f64;
                    let mean_gy = gp.iter().zip(yp).map(|(g, v)| g * v).sum::<f64>() / hw as f64;
                    for ((d, g), v) in dst.iter_mut().zip(gp).zip(yp) {
                        *d = is * (g - mean_g - v * mean_gy);
                    }
                }
                self.accumulate(grads, *x, dx);
            }
            Op::LeakyRelu { x, slope } => {
                let xv = self.value(*x);
                let data = xv
                    .data()
                    .iter()
                    .zip(gy.data())
                    .map(|(&v, &g)| if v > 0.0 { g } else { slope * g })
                    .collect();
                self.accumulate(grads, *x, Tensor::from_vec(y.shape(), data).unwrap());
            }
            Op::Sigmoid { x } => {
                let data = y
                    .data()
                    .iter()
                    .zip(gy.data())
                    .map(|(&s, &g)| g * s * (1.0 - s))
                    .collect();
                self.accumulate(grads, *x, Tensor::from_vec(y.shape(), data).unwrap());
            }
            Op::Concat { a, b } => {
                let ca = self.value(*a).channels();
                let [n, c, h, w] = y.shape();
                let plane = h * w;
                if self.rg(*a) {
                    let mut ga = Vec::with_capacity(n * ca * plane);
                    for s in 0..n {
                        ga.extend_from_slice(&gy.sample(s)[..ca * plane]);
                    }
                    self.accumulate(grads, *a, Tensor::from_vec([n, ca, h, w], ga).unwrap());
                }
                if self.rg(*b) {
                    let mut gb = Vec::with_capacity(n * (c - ca) * plane);
                    for s in 0..n {
                        gb.extend_from_slice(&gy.sample(s)[ca * plane..]);
                    }
                    self.accumulate(grads, *b, Tensor::from_vec([n, c - ca, h, w], gb).unwrap());
                }
            }
            Op::Add { a, b } => {
                if self.rg(*a) {
                    self.accumulate(grads, *a, gy.clone());
                }
                if self.rg(*b) {
                    self.accumulate(grads, *b, gy.clone());
                }
            }
            Op::Sub { a, b } => {
                if self.rg(*a) {
                    self.accumulate(grads, *a, gy.clone());
                }
                if self.rg(*b) {
                    self.accumulate(grads, *b, gy.map(|g| -g));
                }
            }
            Op::Mul { a, b } => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if self.rg(*a) {
                    self.accumulate(grads, *a, zip_map(gy, bv, |g, v| g * v));
                }
                if self.rg(*b) {
                    self.accumulate(grads, *b, zip_map(gy, av, |g, v| g * v));
                }
            }
            Op::Div { a, b } => {
                let bv = self.value(*b);
                if self.rg(*a) {
                    self.accumulate(grads, *a, zip_map(gy, bv, |g, v| g / v));
                }
                if self.rg(*b) {
                    // d(a/b)/db = -(a/b)/b = -y/b
                    let data = gy
                        .data()
                        .iter()
                        .zip(y.data())
                        .zip(bv.data())
                        .map(|((g, q), d)| -g * q / d)
                        .collect();
                    self.accumulate(grads, *b, Tensor::from_vec(y.shape(), data).unwrap());
                }
            }
            Op::Affine { x, scale } => {
                self.accumulate(grads, *x, gy.map(|g| g * scale));
            }
            Op::Abs { x } => {
                let xv = self.value(*x);
                self.accumulate(grads, *x, zip_map(gy, xv, |g, v| g * sign(v)));
            }
            Op::Square { x } => {
                let xv = self.value(*x);
                self.accumulate(grads, *x, zip_map(gy, xv, |g, v| 2.0 * g * v));
            }
            Op::Mean { x } => {
                let xv = self.value(*x);
                let g = gy.item() / xv.numel() as f64;
                self.accumulate(grads, *x, Tensor::full(xv.shape(), g));
            }
            Op::SpatialMean { x } => {
                let shape = self.value(*x).shape();
                let hw = shape[2] * shape[3];
                let mut dx = Tensor::zeros(shape);
                for (plane, g) in dx.data_mut().chunks_mut(hw).zip(gy.data()) {
                    plane.fill(g / hw as f64);
                }
                self.accumulate(grads, *x, dx);
            }
            Op::PowPositive { x, exponent } => {
                let xv = self.value(*x);
                let p = *exponent;
                self.accumulate(
                    grads,
                    *x,
                    zip_map(gy, xv, |g, v| {
                        if v > 0.0 {
                            g * p * v.powf(p - 1.0)
                        } else {
                            0.0
                        }
                    }),
                );
            }
            Op::BlurValid { x, taps } => {
                let shape = self.value(*x).shape();
                let (h, w) = (shape[2], shape[3]);
                let (oh, ow) = (y.height(), y.width());
                let mut dx = Tensor::zeros(shape);
                for (dst, g) in dx
                    .data_mut()
                    .chunks_mut(h * w)
                    .zip(gy.data().chunks(oh * ow))
                {
                    kernels::blur_plane_valid_adjoint(g, h, w, taps, dst);
                }
                self.accumulate(grads, *x, dx);
            }
            Op::AvgPool2 { x } => {
                let shape = self.value(*x).shape();
                let (h, w) = (shape[2], shape[3]);
                let (oh, ow) = (y.height(), y.width());
                let mut dx = Tensor::zeros(shape);
                for (dst, g) in dx
                    .data_mut()
                    .chunks_mut(h * w)
                    .zip(gy.data().chunks(oh * ow))
                {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let v = 0.25 * g[oy * ow + ox];
                            let i = 2 * oy * w + 2 * ox;
                            dst[i] += v;
                            dst[i + 1] += v;
                            dst[i + w] += v;
                            dst[i + w + 1] += v;
                        }
                    }
                }
                self.accumulate(grads, *x, dx);
            }
        }
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| f(x, y))
        .collect();
    Tensor::from_vec(a.shape(), data).unwrap()
}

fn channel_sums(gy: &Tensor, n: usize, c: usize, plane: usize) -> Tensor {
    let mut db = Tensor::zeros([1, c, 1, 1]);
    for s in 0..n {
        for (o, chunk) in gy.sample(s).chunks(plane).enumerate() {
            db.data_mut()[o] += chunk.iter().sum::<f64>();
        }
    }
    db
}

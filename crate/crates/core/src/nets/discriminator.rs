//! PatchGAN discriminator.
//!
//! For `n = n_layers` and widths `w_k = base * min(2^(k-1), 8)`, all kernels
//! 4x4 with padding 1:
//!
//! | layer        | stride | out      | post           |
//! |--------------|--------|----------|----------------|
//! | `conv1`      | 2      | `w_1`    | lrelu          |
//! | `conv_k`, k<=n | 2    | `w_k`    | IN, lrelu      |
//! | `conv_{n+1}` | 1      | `w_{n+1}`| IN, lrelu      |
//! | `head`       | 1      | 1        | none (raw score)|
//!
//! A side of `s` pixels maps to `s / 2^n - 2` patch scores.

use rand::Rng;

use crate::autograd::{Graph, Var};
use crate::error::{Error, Result};
use crate::nets::params::{Bound, ParamKind, ParamSpec, Params};
use crate::tensor::Tensor;

const KERNEL: usize = 4;
const SLOPE: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct DiscriminatorSpec {
    pub in_channels: usize,
    pub n_layers: usize,
    pub base_channels: usize,
}

impl DiscriminatorSpec {
    /// `n_layers = min(3, log2(image_size) - 3)`, at least 1.
    pub fn for_image(in_channels: usize, image_size: usize, base_channels: usize) -> Self {
        let log2 = image_size.max(1).ilog2() as usize;
        DiscriminatorSpec {
            in_channels,
            n_layers: log2.saturating_sub(3).clamp(1, 3),
            base_channels,
        }
    }

    pub fn width(&self, k: usize) -> usize {
        self.base_channels * (1usize << (k - 1)).min(8)
    }

    /// Smallest accepted input side.
    pub fn min_side(&self) -> usize {
        // 2^n halvings followed by two stride-1 4x4 convolutions need 3 pixels left over.
        3 << self.n_layers
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.base_channels == 0 {
            return Err(Error::InvalidSpec("channel counts must be positive".into()));
        }
        if !(1..=5).contains(&self.n_layers) {
            return Err(Error::InvalidSpec(format!(
                "{} discriminator layers",
                self.n_layers
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Discriminator {
    spec: DiscriminatorSpec,
    layout: Vec<ParamSpec>,
}

/// Raw per-patch scores, `[batch, 1, h, w]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchMap(pub Tensor);

impl PatchMap {
    pub fn scores(&self) -> &Tensor {
        &self.0
    }
}

impl Discriminator {
    pub fn new(spec: DiscriminatorSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.n_layers;
        let mut layout = Vec::new();
        let mut cin = spec.in_channels;
        let mut push = |name: String, cin: usize, cout: usize| {
            layout.push(ParamSpec {
                name: format!("{name}.weight"),
                shape: [cout, cin, KERNEL, KERNEL],
                kind: ParamKind::Weight,
            });
            layout.push(ParamSpec {
                name: format!("{name}.bias"),
                shape: [1, cout, 1, 1],
                kind: ParamKind::Bias,
            });
        };
        for k in 1..=n + 1 {
            let cout = spec.width(k);
            push(format!("conv{k}"), cin, cout);
            cin = cout;
        }
        push("head".into(), cin, 1);
        Ok(Discriminator { spec, layout })
    }

    pub fn spec(&self) -> &DiscriminatorSpec {
        &self.spec
    }

    pub fn layout(&self) -> &[ParamSpec] {
        &self.layout
    }

    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> Params {
        Params::init(&self.layout, rng)
    }

    /// Spatial size of the patch grid for a `side x side` input.
    pub fn patch_side(&self, side: usize) -> usize {
        (side >> self.spec.n_layers).saturating_sub(2)
    }

    pub fn forward(&self, g: &mut Graph, p: &Bound, x: Var) -> Result<Var> {
        let xv = g.value(x);
        if xv.channels() != self.spec.in_channels {
            return Err(Error::ChannelMismatch {
                expected: self.spec.in_channels,
                actual: xv.channels(),
            });
        }
        let min = self.spec.min_side();
        if xv.height() < min || xv.width() < min {
            return Err(Error::TooSmall(format!(
                "{}x{} discriminator input (need {min})",
                xv.height(),
                xv.width()
            )));
        }
        if !xv.is_finite() {
            return Err(Error::NonFinite("discriminator input".into()));
        }
        let n = self.spec.n_layers;
        let mut h = x;
        for k in 1..=n + 1 {
            let (w, b) = p.pair(k - 1);
            let stride = if k <= n { 2 } else { 1 };
            h = g.conv2d(h, w, b, stride, 1)?;
            if k > 1 {
                h = g.instance_norm(h);
            }
            h = g.leaky_relu(h, SLOPE);
        }
        let (w, b) = p.pair(n + 1);
        g.conv2d(h, w, b, 1, 1)
    }

    pub fn apply(&self, params: &Params, x: &Tensor) -> Result<PatchMap> {
        params.check_layout(&self.layout)?;
        let mut g = Graph::new();
        let bound = params.bind(&mut g, false);
        let xv = g.constant(x.clone());
        let y = self.forward(&mut g, &bound, xv)?;
        Ok(PatchMap(g.value(y).clone()))
    }
}

pub fn build_discriminator<R: Rng + ?Sized>(
    spec: DiscriminatorSpec,
    rng: &mut R,
) -> Result<(Discriminator, Params)> {
    let net = Discriminator::new(spec)?;
    let params = net.init_params(rng);
    Ok((net, params))
}

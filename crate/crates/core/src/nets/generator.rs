//! U-Net generator.
//!
//! Layer table for `depth = d` with widths `c_i = min(base * 2^(i-1), 8 * base)`:
//!
//! | layer    | op                      | in                     | out                     | post        |
//! |----------|-------------------------|------------------------|-------------------------|-------------|
//! | `down1`  | conv 4x4 / 2, pad 1     | `in_channels`          | `c_1`                   |             |
//! | `down_i` | lrelu(0.2), conv 4x4 / 2| `c_{i-1}`              | `c_i`                   | IN if i < d |
//! | `up_d`   | relu, convT 4x4 / 2     | `c_d`                  | `c_{d-1}` (`base` if d=1)| IN if d > 1 |
//! | `up_i`   | relu, convT 4x4 / 2     | `2 c_i` (skip concat)  | `c_{i-1}` (`base` if i=1)| IN if i > 1 |
//! | `out`    | relu, conv 1x1          | `base`                 | `out_channels`          | sigmoid     |
//!
//! IN is instance normalization without affine parameters.

use rand::Rng;

use crate::autograd::{Graph, Var};
use crate::error::{Error, Result};
use crate::nets::params::{Bound, ParamKind, ParamSpec, Params};
use crate::tensor::Tensor;

const KERNEL: usize = 4;
const SLOPE: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct GeneratorSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub image_size: usize,
    pub base_channels: usize,
    pub depth: usize,
}

impl GeneratorSpec {
    /// Spec with the default depth `log2(image_size) - 2`.
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        image_size: usize,
        base_channels: usize,
    ) -> Self {
        let depth = if image_size.is_power_of_two() && image_size >= 4 {
            image_size.trailing_zeros() as usize - 2
        } else {
            0
        };
        GeneratorSpec {
            in_channels,
            out_channels,
            image_size,
            base_channels,
            depth,
        }
    }

    pub fn with_depth(mut self, depth: usize) -> Self {
        self.depth = depth;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.image_size.is_power_of_two() || self.image_size < 16 {
            return Err(Error::InvalidSpec(format!(
                "generator image size {} must be a power of two >= 16",
                self.image_size
            )));
        }
        if self.depth == 0 || (1usize << self.depth) > self.image_size {
            return Err(Error::InvalidSpec(format!(
                "depth {} is invalid for image size {}",
                self.depth, self.image_size
            )));
        }
        if self.in_channels == 0 || self.out_channels == 0 || self.base_channels == 0 {
            return Err(Error::InvalidSpec("channel counts must be positive".into()));
        }
        Ok(())
    }

    /// Encoder width at level `i` (1-based).
    pub fn width(&self, level: usize) -> usize {
        (self.base_channels << (level - 1).min(3)).min(8 * self.base_channels)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    spec: GeneratorSpec,
    layout: Vec<ParamSpec>,
}

fn conv_pair(name: &str, weight: [usize; 4], out: usize) -> [ParamSpec; 2] {
    [
        ParamSpec {
            name: format!("{name}.weight"),
            shape: weight,
            kind: ParamKind::Weight,
        },
        ParamSpec {
            name: format!("{name}.bias"),
            shape: [1, out, 1, 1],
            kind: ParamKind::Bias,
        },
    ]
}

impl Generator {
    pub fn new(spec: GeneratorSpec) -> Result<Self> {
        spec.validate()?;
        let d = spec.depth;
        let mut layout = Vec::new();
        for i in 1..=d {
            let cin = if i == 1 {
                spec.in_channels
            } else {
                spec.width(i - 1)
            };
            let cout = spec.width(i);
            layout.extend(conv_pair(
                &format!("down{i}"),
                [cout, cin, KERNEL, KERNEL],
                cout,
            ));
        }
        for i in (1..=d).rev() {
            let cin = if i == d {
                spec.width(d)
            } else {
                2 * spec.width(i)
            };
            let cout = if i == 1 {
                spec.base_channels
            } else {
                spec.width(i - 1)
            };
            layout.extend(conv_pair(
                &format!("up{i}"),
                [cin, cout, KERNEL, KERNEL],
                cout,
            ));
        }
        layout.extend(conv_pair(
            "out",
            [spec.out_channels, spec.base_channels, 1, 1],
            spec.out_channels,
        ));
        Ok(Generator { spec, layout })
    }

    pub fn spec(&self) -> &GeneratorSpec {
        &self.spec
    }

    pub fn layout(&self) -> &[ParamSpec] {
        &self.layout
    }

    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> Params {
        Params::init(&self.layout, rng)
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.channels() != self.spec.in_channels {
            return Err(Error::ChannelMismatch {
                expected: self.spec.in_channels,
                actual: x.channels(),
            });
        }
        let m = 1 << self.spec.depth;
        if !x.height().is_multiple_of(m)
            || !x.width().is_multiple_of(m)
            || x.height() < m
            || x.width() < m
        {
            return Err(Error::ShapeMismatch {
                op: "generator input (sides must be multiples of 2^depth)",
                left: x.shape(),
                right: [x.batch(), self.spec.in_channels, m, m],
            });
        }
        if !x.is_finite() {
            return Err(Error::NonFinite("generator input".into()));
        }
        Ok(())
    }

    pub fn forward(&self, g: &mut Graph, p: &Bound, x: Var) -> Result<Var> {
        self.check_input(g.value(x))?;
        let d = self.spec.depth;
        let mut skips = Vec::with_capacity(d);
        let mut h = x;
        for i in 1..=d {
            if i > 1 {
                h = g.leaky_relu(h, SLOPE);
            }
            let (w, b) = p.pair(i - 1);
            h = g.conv2d(h, w, b, 2, 1)?;
            if i > 1 && i < d {
                h = g.instance_norm(h);
            }
            skips.push(h);
        }
        let mut u = skips[d - 1];
        for (j, i) in (1..=d).rev().enumerate() {
            if i < d {
                u = g.concat(skips[i - 1], u)?;
            }
            let a = g.relu(u);
            let (w, b) = p.pair(d + j);
            u = g.conv_transpose2d(a, w, b, 2, 1)?;
            if i > 1 {
                u = g.instance_norm(u);
            }
        }
        let a = g.relu(u);
        let (w, b) = p.pair(2 * d);
        let y = g.conv2d(a, w, b, 1, 0)?;
        Ok(g.sigmoid(y))
    }

    /// Forward pass without gradient tracking.
    pub fn apply(&self, params: &Params, x: &Tensor) -> Result<Tensor> {
        params.check_layout(&self.layout)?;
        let mut g = Graph::new();
        let bound = params.bind(&mut g, false);
        let xv = g.constant(x.clone());
        let y = self.forward(&mut g, &bound, xv)?;
        Ok(g.value(y).clone())
    }
}

pub fn build_generator<R: Rng + ?Sized>(
    spec: GeneratorSpec,
    rng: &mut R,
) -> Result<(Generator, Params)> {
    let net = Generator::new(spec)?;
    let params = net.init_params(rng);
    Ok((net, params))
}

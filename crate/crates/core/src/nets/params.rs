use rand::Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

use crate::autograd::{Graph, Var};
use crate::error::{Error, Result};
use crate::tensor::{Shape, Tensor};

pub const INIT_STD: f64 = 0.02;

/// Whether a named array is a convolution weight or a bias.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    Weight,
    Bias,
}

/// Name, shape and kind of one parameter array.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Shape,
    pub kind: ParamKind,
}

/// Ordered named parameter arrays of one network.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl Params {
    /// Weights from `Normal(0, 0.02)`, biases zero, drawn in layout order.
    pub fn init<R: Rng + ?Sized>(layout: &[ParamSpec], rng: &mut R) -> Self {
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        let mut names = Vec::with_capacity(layout.len());
        let mut tensors = Vec::with_capacity(layout.len());
        for spec in layout {
            let mut t = Tensor::zeros(spec.shape);
            if spec.kind == ParamKind::Weight {
                t.data_mut()
                    .iter_mut()
                    .for_each(|v| *v = normal.sample(rng));
            }
            names.push(spec.name.clone());
            tensors.push(t);
        }
        Params { names, tensors }
    }

    pub fn zeros(layout: &[ParamSpec]) -> Self {
        Params {
            names: layout.iter().map(|s| s.name.clone()).collect(),
            tensors: layout.iter().map(|s| Tensor::zeros(s.shape)).collect(),
        }
    }

    pub fn from_parts(names: Vec<String>, tensors: Vec<Tensor>) -> Result<Self> {
        if names.len() != tensors.len() {
            return Err(Error::InvalidSpec(
                "parameter names and arrays differ in count".into(),
            ));
        }
        Ok(Params { names, tensors })
    }

    /// Checks names and shapes against a layout.
    pub fn check_layout(&self, layout: &[ParamSpec]) -> Result<()> {
        if self.names.len() != layout.len() {
            return Err(Error::InvalidSpec(format!(
                "expected {} parameter arrays, found {}",
                layout.len(),
                self.names.len()
            )));
        }
        for ((name, t), spec) in self.names.iter().zip(&self.tensors).zip(layout) {
            if *name != spec.name || t.shape() != spec.shape {
                return Err(Error::InvalidSpec(format!(
                    "parameter {name} {:?} does not match {} {:?}",
                    t.shape(),
                    spec.name,
                    spec.shape
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.tensors[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    /// Total number of scalar parameters.
    pub fn count(&self) -> usize {
        self.tensors.iter().map(Tensor::numel).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }

    /// SHA-256 over names, shapes and little-endian values.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for (name, t) in self.iter() {
            h.update((name.len() as u64).to_le_bytes());
            h.update(name.as_bytes());
            for d in t.shape() {
                h.update((d as u64).to_le_bytes());
            }
            for v in t.data() {
                h.update(v.to_le_bytes());
            }
        }
        hex(&h.finalize())
    }

    /// Places every array on `g`, as trainable leaves or as constants.
    pub fn bind(&self, g: &mut Graph, trainable: bool) -> Bound {
        let vars = self
            .tensors
            .iter()
            .map(|t| {
                if trainable {
                    g.param(t.clone())
                } else {
                    g.constant(t.clone())
                }
            })
            .collect();
        Bound { vars }
    }
}

/// Parameters placed on a [`Graph`], in layout order.
#[derive(Clone, Debug)]
pub struct Bound {
    vars: Vec<Var>,
}

impl Bound {
    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub(crate) fn pair(&self, layer: usize) -> (Var, Var) {
        (self.vars[2 * layer], self.vars[2 * layer + 1])
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

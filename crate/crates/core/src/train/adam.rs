use crate::error::{Error, Result};
use crate::nets::Params;
use crate::tensor::Tensor;

pub const BETA1: f64 = 0.5;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Adam moments for one parameter set.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub step: u64,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
}

impl OptimizerState {
    pub fn new(params: &Params) -> Self {
        let zeros: Vec<Tensor> = params
            .tensors()
            .iter()
            .map(|t| Tensor::zeros(t.shape()))
            .collect();
        OptimizerState {
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn matches(&self, params: &Params) -> bool {
        self.m.len() == params.len()
            && self.v.len() == params.len()
            && params
                .tensors()
                .iter()
                .zip(self.m.iter().zip(&self.v))
                .all(|(p, (m, v))| p.shape() == m.shape() && p.shape() == v.shape())
    }
}

/// One bias-corrected Adam update in place.
///
/// Nothing is modified when a gradient is non-finite; the error names
/// `component`.
pub fn adam_step(
    params: &mut Params,
    grads: &[Tensor],
    state: &mut OptimizerState,
    lr: f64,
    component: &str,
) -> Result<()> {
    if !state.matches(params) {
        return Err(Error::InvalidSpec(format!(
            "optimizer state does not match {component} parameters"
        )));
    }
    if grads.len() != params.len() {
        return Err(Error::InvalidSpec(format!(
            "{} gradients for {} {component} parameters",
            grads.len(),
            params.len()
        )));
    }
    for (g, p) in grads.iter().zip(params.tensors()) {
        g.ensure_same_shape(p, "adam_step")?;
    }
    if !grads.iter().all(Tensor::is_finite) {
        return Err(Error::Diverged {
            component: format!("{component} gradient"),
            step: state.step + 1,
        });
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - BETA1.powi(t);
    let c2 = 1.0 - BETA2.powi(t);
    for (((p, g), m), v) in params
        .tensors_mut()
        .iter_mut()
        .zip(grads)
        .zip(&mut state.m)
        .zip(&mut state.v)
    {
        let it = p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()));
        for ((p, &g), (m, v)) in it {
            *m = BETA1 * *m + (1.0 - BETA1) * g;
            *v = BETA2 * *v + (1.0 - BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + EPSILON);
        }
    }
    Ok(())
}

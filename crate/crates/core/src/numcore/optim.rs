use super::params::{GradientSet, ModelParameters};
use crate::error::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// `params - stepsize * grads`, leaving both inputs untouched.
pub fn sgd_step(params: &ModelParameters, grads: &GradientSet, stepsize: f64) -> Result<ModelParameters> {
    if !params.same_shape(grads.as_params()) {
        return Err(Error::Config("gradient shape does not match parameters".into()));
    }
    let mut out = params.clone();
    for (p, g) in out.values_mut().zip(grads.values()) {
        *p -= stepsize * g;
    }
    Ok(out)
}

/// First and second moment estimates for Adam, flattened in parameter order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &ModelParameters) -> Self {
        Self::with_len(params.num_values())
    }

    pub fn with_len(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }
}

/// One bias-corrected Adam update with β₁=0.9, β₂=0.999, ε=1e-8.
pub fn adam_step(
    state: &AdamState,
    params: &ModelParameters,
    grads: &GradientSet,
    stepsize: f64,
) -> Result<(ModelParameters, AdamState)> {
    if !params.same_shape(grads.as_params()) {
        return Err(Error::Config("gradient shape does not match parameters".into()));
    }
    let n = params.num_values();
    if state.m.len() != n || state.v.len() != n {
        return Err(Error::shape("adam state", n, state.m.len()));
    }
    let mut next = state.clone();
    let mut out = params.clone();
    adam_apply(&mut next, out.values_mut(), grads.values(), stepsize);
    Ok((out, next))
}

/// In-place Adam update over parallel value and gradient sequences.
pub(crate) fn adam_apply<'a, 'b>(
    state: &mut AdamState,
    params: impl Iterator<Item = &'a mut f64>,
    grads: impl Iterator<Item = &'b f64>,
    stepsize: f64,
) {
    state.t += 1;
    let c1 = 1.0 - ADAM_BETA1.powi(state.t as i32);
    let c2 = 1.0 - ADAM_BETA2.powi(state.t as i32);
    for (((p, g), m), v) in params.zip(grads).zip(state.m.iter_mut()).zip(state.v.iter_mut()) {
        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= stepsize * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
}

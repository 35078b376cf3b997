use serde::{Deserialize, Serialize};

use super::params::Parameters;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Adam moments for a fixed parameter layout.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
}

impl<T: Real> AdamState<T> {
    pub fn new<P: Parameters<T>>(config: AdamConfig, params: &P) -> Self {
        let zeros: Vec<Vec<T>> = params.param_views().iter().map(|v| vec![T::zero(); v.data.len()]).collect();
        Self { config, step: 0, first: zeros.clone(), second: zeros }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update of `params` from `grads`.
pub fn adam_step<T: Real, P: Parameters<T>>(state: &mut AdamState<T>, params: &mut P, grads: &P) -> Result<()> {
    let grad_views = grads.param_views();
    let mut slots = params.param_slices_mut();
    if slots.len() != state.first.len() || grad_views.len() != slots.len() {
        return Err(Error::dims("adam_step tensor count", state.first.len(), format!("{} params / {} grads", slots.len(), grad_views.len())));
    }
    for (i, (p, g)) in slots.iter().zip(&grad_views).enumerate() {
        if p.len() != state.first[i].len() || g.data.len() != p.len() {
            return Err(Error::dims("adam_step tensor shape", state.first[i].len(), format!("{} / {}", p.len(), g.data.len())));
        }
    }

    state.step += 1;
    let c = state.config;
    let b1 = T::lit(c.beta1);
    let b2 = T::lit(c.beta2);
    let one = T::one();
    let lr = T::lit(c.learning_rate);
    let eps = T::lit(c.epsilon);
    let t = state.step as i32;
    let corr1 = one - b1.powi(t);
    let corr2 = one - b2.powi(t);

    for (i, (p, g)) in slots.iter_mut().zip(&grad_views).enumerate() {
        let m = &mut state.first[i];
        let v = &mut state.second[i];
        for j in 0..p.len() {
            let gj = g.data[j];
            m[j] = b1 * m[j] + (one - b1) * gj;
            v[j] = b2 * v[j] + (one - b2) * gj * gj;
            let m_hat = m[j] / corr1;
            let v_hat = v[j] / corr2;
            p[j] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

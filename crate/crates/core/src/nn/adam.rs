//! Adam with bias-corrected moment estimates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config("learning_rate must be finite and > 0".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("beta1 and beta2 must lie in [0, 1)".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }
}

pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    config: &AdamConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() || params.len() != state.v.len()
    {
        return Err(Error::Schema(format!(
            "adam shapes differ: {} params, {} grads, {} state",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    state.step += 1;
    let t = i32::try_from(state.step).unwrap_or(i32::MAX);
    let AdamConfig {
        learning_rate: lr,
        beta1: b1,
        beta2: b2,
        epsilon: eps,
    } = *config;
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(&mut state.m)
        .zip(&mut state.v)
    {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = vec![1.0, -2.0, 3.0];
        let mut s = AdamState::new(3);
        adam_step(&mut p, &[0.0; 3], &mut s, &AdamConfig::default()).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn first_step_is_learning_rate_sized() {
        let cfg = AdamConfig::default();
        let grads = [3.0, -1e-3, 250.0, -7.0];
        let mut p = vec![0.0; 4];
        let mut s = AdamState::new(4);
        adam_step(&mut p, &grads, &mut s, &cfg).unwrap();
        for (dp, g) in p.iter().zip(grads) {
            assert!(dp.abs() <= cfg.learning_rate * (1.0 + cfg.epsilon));
            assert_eq!(dp.signum(), -g.signum());
            assert!(
                (dp.abs() - cfg.learning_rate).abs() < 1e-6 * cfg.learning_rate / g.abs().min(1.0)
            );
        }
    }

    #[test]
    fn quadratic_trajectory_matches_hand_recurrence() {
        // f(x) = x^2, x0 = 1, lr 0.1.
        let cfg = AdamConfig {
            learning_rate: 0.1,
            ..AdamConfig::default()
        };
        let mut x = vec![1.0];
        let mut s = AdamState::new(1);
        let (mut m, mut v, mut xh) = (0.0f64, 0.0f64, 1.0f64);
        for t in 1..=3 {
            let g = 2.0 * x[0];
            adam_step(&mut x, &[g], &mut s, &cfg).unwrap();
            let gh = 2.0 * xh;
            m = 0.9 * m + 0.1 * gh;
            v = 0.999 * v + 0.001 * gh * gh;
            let m_hat = m / (1.0 - 0.9f64.powi(t));
            let v_hat = v / (1.0 - 0.999f64.powi(t));
            xh -= 0.1 * m_hat / (v_hat.sqrt() + 1e-8);
            assert!((x[0] - xh).abs() < 1e-15);
        }
        // Each early step moves by about the learning rate.
        assert!((x[0] - 0.7).abs() < 5e-3);
    }

    #[test]
    fn shape_mismatch() {
        let mut p = vec![0.0; 2];
        let mut s = AdamState::new(2);
        assert!(adam_step(&mut p, &[0.0; 3], &mut s, &AdamConfig::default()).is_err());
    }
}

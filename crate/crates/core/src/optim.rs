//! ADAM over accumulated increments, and the raw SGD step.

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_rate(rate: f64) -> Self {
        Self {
            rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment estimates for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<S> {
    pub config: AdamConfig,
    m: Vec<S>,
    v: Vec<S>,
    step: u64,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(len: usize, config: AdamConfig) -> Self {
        Self {
            config,
            m: vec![S::zero(); len],
            v: vec![S::zero(); len],
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected descent step: `params -= rate · m̂ / (√v̂ + ε)`.
    pub fn step(&mut self, params: &mut [S], grads: &[S]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(shape_err(
                "adam_step",
                self.m.len(),
                format!("params {}, grads {}", params.len(), grads.len()),
            ));
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite {
                context: "adam gradient",
                step: self.step as usize,
            });
        }
        self.step += 1;
        let c = &self.config;
        let (b1, b2) = (S::lit(c.beta1), S::lit(c.beta2));
        let one = S::one();
        let bc1 = one - b1.powi(self.step as i32);
        let bc2 = one - b2.powi(self.step as i32);
        let rate = S::lit(c.rate);
        let eps = S::lit(c.eps);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = b1 * self.m[i] + (one - b1) * g;
            self.v[i] = b2 * self.v[i] + (one - b2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= rate * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

/// Free-function form of [`AdamState::step`].
pub fn adam_step<S: Scalar>(params: &mut [S], grads: &[S], state: &mut AdamState<S>) -> Result<()> {
    state.step(params, grads)
}

/// `params += rate · update`. The sign convention belongs to the caller.
pub fn sgd_step<S: Scalar>(params: &mut [S], update: &[S], rate: S) -> Result<()> {
    if params.len() != update.len() {
        return Err(shape_err("sgd_step", params.len(), update.len()));
    }
    for (p, &u) in params.iter_mut().zip(update) {
        *p += rate * u;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_and_counts_step() {
        let mut st = AdamState::<f64>::new(3, AdamConfig::with_rate(0.1));
        let mut p = vec![1.0, -2.0, 3.0];
        st.step(&mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
        assert_eq!(st.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_rate_times_sign() {
        let mut st = AdamState::<f64>::new(3, AdamConfig::with_rate(0.01));
        let mut p = vec![0.0; 3];
        st.step(&mut p, &[2.0, -0.5, 1e-3]).unwrap();
        for (got, want) in p.iter().zip([-0.01, 0.01, -0.01]) {
            assert!((got - want).abs() < 1e-7, "{got} vs {want}");
        }
    }

    #[test]
    fn ten_scalar_steps_match_reference() {
        // Independent scalar recurrence, written out directly.
        let grads = [0.3, -0.1, 0.7, 0.2, -0.4, 0.05, 0.9, -0.6, 0.1, 0.0];
        let (lr, b1, b2, eps) = (1e-2f64, 0.9f64, 0.999f64, 1e-8f64);
        let (mut m, mut v, mut x) = (0.0f64, 0.0f64, 1.5f64);
        let mut reference = Vec::new();
        for (k, g) in grads.iter().enumerate() {
            let t = (k + 1) as i32;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            x -= lr * (m / (1.0 - b1.powi(t))) / ((v / (1.0 - b2.powi(t))).sqrt() + eps);
            reference.push(x);
        }
        let mut st = AdamState::<f64>::new(1, AdamConfig::with_rate(lr));
        let mut p = [1.5];
        for (g, want) in grads.iter().zip(reference) {
            st.step(&mut p, &[*g]).unwrap();
            assert!((p[0] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut st = AdamState::<f64>::new(1, AdamConfig::with_rate(0.1));
        assert!(st.step(&mut [0.0], &[f64::NAN]).is_err());
    }

    #[test]
    fn sgd_rate_zero_and_linearity() {
        let mut p = vec![1.0, 2.0];
        sgd_step(&mut p, &[5.0, -5.0], 0.0).unwrap();
        assert_eq!(p, vec![1.0, 2.0]);
        let mut a = vec![0.0f64, 0.0];
        let mut b = vec![0.0f64, 0.0];
        sgd_step(&mut a, &[1.0, -3.0], 0.2).unwrap();
        sgd_step(&mut b, &[1.0, -3.0], 0.1).unwrap();
        sgd_step(&mut b, &[1.0, -3.0], 0.1).unwrap();
        assert!((a[0] - b[0]).abs() < 1e-15 && (a[1] - b[1]).abs() < 1e-15);
    }

    #[test]
    fn sign_pattern_invariant_to_positive_scaling() {
        let g = [0.4, -1.2, 3.0, -0.01];
        let mut p1 = [0.0; 4];
        let mut p2 = [0.0; 4];
        AdamState::new(4, AdamConfig::with_rate(0.1)).step(&mut p1, &g).unwrap();
        let scaled: Vec<f64> = g.iter().map(|v| v * 250.0).collect();
        AdamState::new(4, AdamConfig::with_rate(0.1))
            .step(&mut p2, &scaled)
            .unwrap();
        for (a, b) in p1.iter().zip(&p2) {
            assert_eq!(a.signum(), b.signum());
        }
    }
}

use std::collections::BTreeMap;

use crate::error::{Error, Result};

use super::ParameterStore;

/// Bias-corrected Adam moments for every parameter in a [`ParameterStore`].
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step_count: u64,
    moments: BTreeMap<String, (Vec<f64>, Vec<f64>)>,
}

impl Default for AdamState {
    fn default() -> Self {
        Self::new(0.9, 0.999, 1e-8)
    }
}

impl AdamState {
    pub fn new(beta1: f64, beta2: f64, epsilon: f64) -> Self {
        AdamState {
            beta1,
            beta2,
            epsilon,
            step_count: 0,
            moments: BTreeMap::new(),
        }
    }

    pub(crate) fn from_parts(
        beta1: f64,
        beta2: f64,
        epsilon: f64,
        step_count: u64,
        moments: BTreeMap<String, (Vec<f64>, Vec<f64>)>,
    ) -> Self {
        AdamState {
            beta1,
            beta2,
            epsilon,
            step_count,
            moments,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn moments(&self) -> &BTreeMap<String, (Vec<f64>, Vec<f64>)> {
        &self.moments
    }

    /// Apply one update using the gradients stored on each parameter tensor.
    /// Parameters without a gradient are treated as having a zero gradient.
    ///
    /// Gradients are validated before anything is modified, so a non-finite
    /// component leaves both parameters and state untouched.
    pub fn step(&mut self, params: &mut ParameterStore, lr: f64) -> Result<()> {
        for (name, t) in params.iter() {
            if let Some(g) = t.grad() {
                if g.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteGradient(name.clone()));
                }
            }
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
        for (name, tensor) in params.iter_mut() {
            let n = tensor.len();
            let (m, v) = self
                .moments
                .entry(name.clone())
                .or_insert_with(|| (vec![0.0; n], vec![0.0; n]));
            let grad = tensor.grad().map(|g| g.to_vec());
            let values = tensor.values_mut();
            for i in 0..n {
                let g = grad.as_ref().map_or(0.0, |g| g[i]);
                m[i] = b1 * m[i] + (1.0 - b1) * g;
                v[i] = b2 * v[i] + (1.0 - b2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                values[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tensor;

    fn store(values: &[(&str, f64, f64)]) -> ParameterStore {
        let mut s = ParameterStore::new();
        for &(name, v, g) in values {
            let mut t = Tensor::scalar(v);
            t.set_grad(vec![g]).unwrap();
            s.insert(name, t).unwrap();
        }
        s
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut p = store(&[("w", 1.5, 0.0)]);
        let mut adam = AdamState::default();
        adam.step(&mut p, 0.1).unwrap();
        assert_eq!(p.get("w").unwrap().values(), &[1.5]);
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m̂ = g, v̂ = g², so the update is lr·g/(|g|+ε) ≈ lr.
        let mut p = store(&[("w", 0.0, 1.0)]);
        let mut adam = AdamState::default();
        adam.step(&mut p, 0.1).unwrap();
        let w = p.get("w").unwrap().values()[0];
        assert!((w + 0.1 / (1.0 + 1e-8)).abs() < 1e-15, "{w}");
    }

    #[test]
    fn identical_parameters_stay_identical() {
        let mut p = store(&[("a", 0.3, -0.7), ("b", 0.3, -0.7)]);
        let mut adam = AdamState::default();
        for _ in 0..5 {
            adam.step(&mut p, 0.01).unwrap();
        }
        assert_eq!(p.get("a").unwrap().values(), p.get("b").unwrap().values());
    }

    #[test]
    fn non_finite_gradient_names_the_parameter() {
        let mut p = store(&[("ok", 1.0, 0.5), ("bad", 1.0, f64::NAN)]);
        let mut adam = AdamState::default();
        let err = adam.step(&mut p, 0.1).unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient(ref n) if n == "bad"));
        assert_eq!(adam.step_count(), 0);
        assert_eq!(p.get("ok").unwrap().values(), &[1.0]);
    }
}

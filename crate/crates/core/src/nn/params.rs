use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use super::{NnError, Tensor};

static NEXT_SET_ID: AtomicU64 = AtomicU64::new(1);

/// Index of a parameter inside its [`ParameterSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

#[derive(Debug, Clone)]
struct Parameter {
    name: String,
    value: Tensor,
    grad: Tensor,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
}

/// Named trainable tensors with gradient accumulators and Adam moments.
#[derive(Debug, Clone)]
pub struct ParameterSet {
    id: u64,
    params: Vec<Parameter>,
    steps: u64,
}

impl Default for ParameterSet {
    fn default() -> Self {
        Self::new()
    }
}

impl ParameterSet {
    pub fn new() -> Self {
        Self {
            id: NEXT_SET_ID.fetch_add(1, Ordering::Relaxed),
            params: Vec::new(),
            steps: 0,
        }
    }

    pub(crate) fn set_id(&self) -> u64 {
        self.id
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let len = value.len();
        let grad = Tensor::zeros(value.shape());
        self.params.push(Parameter {
            name: name.into(),
            value,
            grad,
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
        });
        ParamId(self.params.len() - 1)
    }

    /// Adds a `[fan_out, fan_in]` weight drawn uniformly from
    /// `±gain·sqrt(6 / (fan_in + fan_out))`.
    pub fn add_glorot<R: Rng + ?Sized>(
        &mut self,
        name: impl Into<String>,
        fan_out: usize,
        fan_in: usize,
        gain: f64,
        rng: &mut R,
    ) -> ParamId {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..fan_in * fan_out)
            .map(|_| gain * rng.random_range(-limit..limit))
            .collect();
        self.add(name, Tensor::with_data(vec![fan_out, fan_in], data))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    /// Replaces a parameter's values; the shape must not change.
    pub fn set_value(&mut self, id: ParamId, value: Tensor) -> Result<(), NnError> {
        let slot = &mut self.params[id.0];
        if slot.value.shape() != value.shape() {
            return Err(NnError::ShapeMismatch {
                op: "set_value",
                left: slot.value.shape().to_vec(),
                right: value.shape().to_vec(),
            });
        }
        slot.value = value;
        Ok(())
    }

    pub fn grad(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].grad
    }

    pub(crate) fn accumulate_grad(&mut self, id: ParamId, grad: &[f64]) {
        let acc = self.params[id.0].grad.data_mut();
        debug_assert_eq!(acc.len(), grad.len());
        for (a, g) in acc.iter_mut().zip(grad) {
            *a += g;
        }
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.data_mut().fill(0.0);
        }
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Number of optimizer steps taken so far.
    pub fn steps(&self) -> u64 {
        self.steps
    }
}

/// Adaptive-moment optimizer constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-5,
        }
    }
}

impl Adam {
    /// Applies one bias-corrected Adam update with the accumulated gradients.
    /// Gradients are left in place; callers zero them.
    pub fn step(&self, params: &mut ParameterSet, lr: f64) {
        params.steps += 1;
        let t = params.steps as i32;
        let correction1 = 1.0 - self.beta1.powi(t);
        let correction2 = 1.0 - self.beta2.powi(t);
        for p in &mut params.params {
            let grads = p.grad.data();
            let values = p.value.data_mut();
            for (i, &g) in grads.iter().enumerate() {
                let m = &mut p.first_moment[i];
                let v = &mut p.second_moment[i];
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let m_hat = *m / correction1;
                let v_hat = *v / correction2;
                values[i] -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_set(w: f64) -> (ParameterSet, ParamId) {
        let mut set = ParameterSet::new();
        let id = set.add("w", Tensor::vector(vec![w]));
        (set, id)
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let (mut set, id) = scalar_set(1.5);
        Adam::default().step(&mut set, 0.1);
        assert_eq!(set.value(id).data(), &[1.5]);
        assert_eq!(set.steps(), 1);
    }

    #[test]
    fn step_descends_on_square() {
        let (mut set, id) = scalar_set(1.0);
        set.accumulate_grad(id, &[2.0]);
        Adam::default().step(&mut set, 0.1);
        let w = set.value(id).data()[0];
        assert!(w < 1.0);
        // Gradient untouched by the step.
        assert_eq!(set.grad(id).data(), &[2.0]);
    }

    #[test]
    fn converges_on_shifted_quadratic() {
        // f(w) = (w - 3)^2, gradient 2(w - 3)
        let (mut set, id) = scalar_set(0.0);
        let adam = Adam::default();
        for _ in 0..500 {
            set.zero_grad();
            let w = set.value(id).data()[0];
            set.accumulate_grad(id, &[2.0 * (w - 3.0)]);
            adam.step(&mut set, 0.1);
        }
        let w = set.value(id).data()[0];
        assert!((w - 3.0).abs() < 1e-2, "w = {w}");
    }

    #[test]
    fn matches_scalar_recursion() {
        // Bias-corrected Adam written out for one coordinate.
        let (b1, b2, eps, lr) = (0.9_f64, 0.999_f64, 1e-5_f64, 0.05_f64);
        let (mut w, mut m, mut v) = (1.0_f64, 0.0_f64, 0.0_f64);
        let (mut set, id) = scalar_set(1.0);
        for t in 1..=50 {
            let g = 2.0 * (w - 3.0);
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let m_hat = m / (1.0 - b1.powi(t));
            let v_hat = v / (1.0 - b2.powi(t));
            w -= lr * m_hat / (v_hat.sqrt() + eps);

            set.zero_grad();
            let current = set.value(id).data()[0];
            set.accumulate_grad(id, &[2.0 * (current - 3.0)]);
            Adam::default().step(&mut set, lr);
        }
        assert_eq!(set.value(id).data()[0], w);
    }

    #[test]
    fn set_value_rejects_new_shape() {
        let (mut set, id) = scalar_set(0.0);
        assert!(set.set_value(id, Tensor::vector(vec![1.0, 2.0])).is_err());
        set.set_value(id, Tensor::vector(vec![4.0])).unwrap();
        assert_eq!(set.value(id).data(), &[4.0]);
    }
}

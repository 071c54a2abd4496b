use serde::{Deserialize, Serialize};

use super::{AutodiffError, ParamStore, Tensor};

/// Adam with bias correction. Moments are indexed like the store's parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
}

impl AdamState {
    pub fn new(store: &ParamStore, lr: f64) -> Self {
        let moments = || store.iter().map(|(_, p)| Tensor::zeros(p.value().rows(), p.value().cols())).collect();
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, first: moments(), second: moments() }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update from the accumulated gradients. Gradients are left
    /// in place; resetting them is up to the caller.
    pub fn step(&mut self, store: &mut ParamStore) -> Result<(), AutodiffError> {
        if store.len() != self.first.len() {
            return Err(AutodiffError::Layout(format!(
                "optimizer tracks {} parameters, store has {}",
                self.first.len(),
                store.len()
            )));
        }
        if let Some((_, p)) = store.iter().find(|(_, p)| !p.has_grad()) {
            return Err(AutodiffError::MissingGradient(p.name().to_string()));
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        for ((_, p), (m, v)) in store.iter_mut().zip(self.first.iter_mut().zip(self.second.iter_mut())) {
            let grad = p.grad().data().to_vec();
            let value = p.value_mut().data_mut();
            for (((w, g), m), v) in value.iter_mut().zip(grad).zip(m.data_mut()).zip(v.data_mut()) {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Graph;

    fn one_param(v: f64) -> (ParamStore, crate::autodiff::ParamId) {
        let mut s = ParamStore::new();
        let id = s.add("w", Tensor::scalar(v));
        (s, id)
    }

    fn set_grad(store: &mut ParamStore, g: f64) {
        // d/dw (g * w) = g
        let mut graph = Graph::new();
        let id = store.iter().next().unwrap().0;
        let grads = {
            let w = graph.param(store, id, true).unwrap();
            let y = graph.scale(w, g).unwrap();
            graph.backward(y).unwrap()
        };
        store.accumulate(&grads).unwrap();
    }

    #[test]
    fn first_step_moves_by_lr() {
        let (mut store, id) = one_param(0.0);
        let mut adam = AdamState::new(&store, 1e-3);
        set_grad(&mut store, 1.0);
        adam.step(&mut store).unwrap();
        let moved = -store.value(id).item();
        assert!((moved - 1e-3 / (1.0 + 1e-8)).abs() < 1e-15, "{moved}");
    }

    #[test]
    fn zero_gradient_leaves_parameter() {
        let (mut store, id) = one_param(1.5);
        let mut adam = AdamState::new(&store, 1e-3);
        set_grad(&mut store, 0.0);
        adam.step(&mut store).unwrap();
        assert_eq!(store.value(id).item(), 1.5);
    }

    #[test]
    fn missing_gradient_is_an_error() {
        let (mut store, _) = one_param(1.0);
        let mut adam = AdamState::new(&store, 1e-3);
        assert!(matches!(adam.step(&mut store), Err(AutodiffError::MissingGradient(_))));
    }

    #[test]
    fn step_does_not_reset_gradients() {
        let (mut store, id) = one_param(0.0);
        let mut adam = AdamState::new(&store, 1e-3);
        set_grad(&mut store, 2.0);
        adam.step(&mut store).unwrap();
        assert_eq!(store.get(id).grad().item(), 2.0);
        assert_eq!(adam.steps(), 1);
    }

    #[test]
    fn converges_on_quadratic() {
        // Oracle: the same recurrence on plain floats, f(w) = (w - 2)^2.
        let (lr, eps) = (0.1, 1e-8);
        let (mut m, mut v, mut w_ref) = (0.0, 0.0, 0.0f64);
        for t in 1..=200 {
            let g = 2.0 * (w_ref - 2.0);
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let m_hat = m / (1.0 - 0.9f64.powi(t));
            let v_hat = v / (1.0 - 0.999f64.powi(t));
            w_ref -= lr * m_hat / (v_hat.sqrt() + eps);
        }

        let (mut store, id) = one_param(0.0);
        let mut adam = AdamState::new(&store, 0.1);
        for _ in 0..200 {
            store.zero_grad();
            let mut graph = Graph::new();
            let grads = {
                let w = graph.param(&store, id, true).unwrap();
                let d = graph.add_scalar(w, -2.0).unwrap();
                let y = graph.square(d).unwrap();
                graph.backward(y).unwrap()
            };
            store.accumulate(&grads).unwrap();
            adam.step(&mut store).unwrap();
        }
        let w = store.value(id).item();
        assert!((w - 2.0).abs() < 1e-2, "w = {w}");
        assert!((w - w_ref).abs() < 1e-12, "w = {w}, oracle = {w_ref}");
    }
}

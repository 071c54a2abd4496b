//! Dense layers and multilayer perceptrons built on [`crate::autodiff`].

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::autodiff::{AutodiffError, Graph, ParamId, ParamStore, Tensor, Var};
use crate::Rng;

/// `y = x W + b` with `W: in x out`, `b: 1 x out`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: ParamId,
    pub bias: ParamId,
    pub inputs: usize,
    pub outputs: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Init {
    /// Uniform on `±1/sqrt(fan_in)` for weights and biases.
    Uniform,
    Zeros,
}

impl Dense {
    pub fn new(store: &mut ParamStore, name: &str, inputs: usize, outputs: usize, init: Init, rng: &mut Rng) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        let mut draw = |n: usize| -> Vec<f64> {
            match init {
                Init::Uniform => (0..n).map(|_| rng.random_range(-bound..bound)).collect(),
                Init::Zeros => vec![0.0; n],
            }
        };
        let w = Tensor::new(inputs, outputs, draw(inputs * outputs)).expect("shape from sizes");
        let b = Tensor::new(1, outputs, draw(outputs)).expect("shape from sizes");
        Dense {
            weight: store.add(format!("{name}.weight"), w),
            bias: store.add(format!("{name}.bias"), b),
            inputs,
            outputs,
        }
    }

    pub fn forward<'a>(&self, g: &mut Graph<'a>, store: &'a ParamStore, x: Var, trainable: bool) -> Result<Var, AutodiffError> {
        let w = g.param(store, self.weight, trainable)?;
        let b = g.param(store, self.bias, trainable)?;
        let xw = g.matmul(x, w)?;
        g.add_row(xw, b)
    }
}

/// Dense layers with ReLU and dropout after every layer but the last.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub dropout: f64,
}

impl Mlp {
    /// `sizes` lists the widths from input to output. `zero_last` zero-initializes
    /// the output layer so the network starts as the constant 0.
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        sizes: &[usize],
        dropout: f64,
        zero_last: bool,
        rng: &mut Rng,
    ) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output widths");
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let init = if zero_last && i == last { Init::Zeros } else { Init::Uniform };
                Dense::new(store, &format!("{name}.{i}"), w[0], w[1], init, rng)
            })
            .collect();
        Mlp { layers, dropout }
    }

    pub fn inputs(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn outputs(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    /// Dropout is active only when `rng` is given.
    pub fn forward<'a>(
        &self,
        g: &mut Graph<'a>,
        store: &'a ParamStore,
        x: Var,
        trainable: bool,
        mut rng: Option<&mut Rng>,
    ) -> Result<Var, AutodiffError> {
        let mut h = x;
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(g, store, h, trainable)?;
            if i < last {
                h = g.relu(h)?;
                h = g.dropout(h, self.dropout, rng.as_deref_mut())?;
            }
        }
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::finite_diff_check;

    #[test]
    fn zero_last_layer_outputs_zero() {
        let mut store = ParamStore::new();
        let mlp = Mlp::new(&mut store, "m", &[3, 8, 2], 0.1, true, &mut crate::rng_stream(1, 0));
        let mut g = Graph::new();
        let x = g.constant(Tensor::from_rows(&[[1.0, -2.0, 0.5]])).unwrap();
        let y = mlp.forward(&mut g, &store, x, false, None).unwrap();
        assert_eq!(g.value(y).data(), &[0.0, 0.0]);
    }

    #[test]
    fn uniform_init_within_bound() {
        let mut store = ParamStore::new();
        Mlp::new(&mut store, "m", &[16, 4], 0.0, false, &mut crate::rng_stream(2, 0));
        assert!(store.iter().all(|(_, p)| p.value().data().iter().all(|v| v.abs() <= 0.25)));
    }

    #[test]
    fn two_layer_net_gradients_match_finite_differences() {
        let mut store = ParamStore::new();
        let mlp = Mlp::new(&mut store, "m", &[3, 5, 1], 0.0, false, &mut crate::rng_stream(3, 0));
        let x = Tensor::from_rows(&[[0.3, -1.2, 0.8], [1.5, 0.1, -0.4]]);
        let report = finite_diff_check(&store, 1e-5, 1e-4, |g, s| {
            let xv = g.constant(x.clone())?;
            let y = mlp.forward(g, s, xv, true, None)?;
            let y2 = g.square(y)?;
            g.mean(y2)
        })
        .unwrap();
        assert!(report.passed(), "{report:?}");
    }
}

//! RealNVP normalizing flow between standardized feature space and latent space.
//!
//! `log p(x) = log p_Z(g(x)) + log |det dg/dx|`, where `g` is a stack of
//! affine couplings whose log-determinant is the sum of their scale outputs.

mod base;
mod coupling;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use base::{BaseConfig, BaseDensity};
pub use coupling::{alternating_mask, Coupling};

use crate::autodiff::{AdamState, AutodiffError, Graph, ParamRecord, ParamStore, Tensor, Var};
use crate::nn::Mlp;
use crate::{Error, Result, Rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    pub couplings: usize,
    /// Width of the hidden layers of every scale and shift network.
    pub hidden: usize,
    /// Number of hidden layers per scale / shift network.
    pub depth: usize,
    pub dropout: f64,
    pub base: BaseConfig,
    pub seed: u64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self { couplings: 3, hidden: 64, depth: 6, dropout: 0.1, base: BaseConfig::default(), seed: 0 }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        let base_ok = match self.base {
            BaseConfig::StandardNormal => true,
            BaseConfig::Mixture { components } => components >= 1,
        };
        if self.couplings == 0 || self.hidden == 0 || self.depth == 0 || !(0.0..1.0).contains(&self.dropout) || !base_ok {
            return Err(Error::Config(format!("flow config out of range: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowModel {
    pub config: FlowConfig,
    pub layers: Vec<Coupling>,
    pub base: BaseDensity,
    store: ParamStore,
}

/// Serialized flow: configuration, width and parameter arrays (base means included).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowState {
    pub config: FlowConfig,
    pub width: usize,
    pub params: Vec<ParamRecord>,
}

fn in_layer(layer: usize) -> impl Fn(AutodiffError) -> Error {
    move |source| match source {
        AutodiffError::NonFinite { .. } => Error::Flow { layer, source },
        other => other.into(),
    }
}

impl FlowModel {
    /// Random hidden layers, zero output layers (identity map), bounds at 1.
    pub fn new(width: usize, config: &FlowConfig) -> Result<Self> {
        config.validate()?;
        if width < 2 {
            return Err(Error::Config(format!("a coupling flow needs at least 2 features, got {width}")));
        }
        let mut rng = crate::rng_stream(config.seed, 0xf10e_0001);
        let mut store = ParamStore::new();
        let mut sizes = vec![width];
        sizes.extend(std::iter::repeat_n(config.hidden, config.depth));
        sizes.push(width);
        let layers = (0..config.couplings)
            .map(|i| Coupling {
                mask: alternating_mask(width, i),
                scale: Mlp::new(&mut store, &format!("coupling.{i}.scale"), &sizes, config.dropout, true, &mut rng),
                shift: Mlp::new(&mut store, &format!("coupling.{i}.shift"), &sizes, config.dropout, true, &mut rng),
                bound: store.add(format!("coupling.{i}.bound"), Tensor::filled(1, width, 1.0)),
            })
            .collect();
        let base = BaseDensity::new(&mut store, config.base, width);
        Ok(Self { config: config.clone(), layers, base, store })
    }

    pub fn width(&self) -> usize {
        self.base.width
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn state(&self) -> FlowState {
        FlowState { config: self.config.clone(), width: self.width(), params: self.store.to_records() }
    }

    pub fn from_state(state: &FlowState) -> Result<Self> {
        let mut f = Self::new(state.width, &state.config)?;
        f.store.load_records(&state.params)?;
        Ok(f)
    }

    /// `x -> (z, log_det)`; dropout is active only when `rng` is given.
    pub fn forward_var<'a>(&'a self, g: &mut Graph<'a>, x: Var, trainable: bool, rng: Option<&mut Rng>) -> Result<(Var, Var)> {
        self.forward_in(g, &self.store, x, trainable, rng)
    }

    pub fn inverse_var<'a>(&'a self, g: &mut Graph<'a>, z: Var, trainable: bool, rng: Option<&mut Rng>) -> Result<Var> {
        self.inverse_in(g, &self.store, z, trainable, rng)
    }

    /// Per-row `log p(x)` (`n x 1`).
    pub fn log_prob_var<'a>(&'a self, g: &mut Graph<'a>, x: Var, trainable: bool, rng: Option<&mut Rng>) -> Result<Var> {
        self.log_prob_in(g, &self.store, x, trainable, rng)
    }

    pub fn base_log_prob_var<'a>(&'a self, g: &mut Graph<'a>, z: Var) -> Result<Var> {
        Ok(self.base.log_prob_var(g, &self.store, z, false)?)
    }

    /// [`FlowModel::forward_var`] with parameter values taken from `store`,
    /// which must share this model's layout.
    pub fn forward_in<'a>(
        &self,
        g: &mut Graph<'a>,
        store: &'a ParamStore,
        x: Var,
        trainable: bool,
        mut rng: Option<&mut Rng>,
    ) -> Result<(Var, Var)> {
        let mut h = x;
        let mut log_det: Option<Var> = None;
        for (i, layer) in self.layers.iter().enumerate() {
            let (z, ld) = layer.forward(g, store, h, trainable, rng.as_deref_mut()).map_err(in_layer(i))?;
            h = z;
            log_det = Some(match log_det {
                Some(acc) => g.add(acc, ld).map_err(in_layer(i))?,
                None => ld,
            });
        }
        Ok((h, log_det.expect("at least one coupling")))
    }

    pub fn inverse_in<'a>(
        &self,
        g: &mut Graph<'a>,
        store: &'a ParamStore,
        z: Var,
        trainable: bool,
        mut rng: Option<&mut Rng>,
    ) -> Result<Var> {
        let mut h = z;
        for (i, layer) in self.layers.iter().enumerate().rev() {
            h = layer.inverse(g, store, h, trainable, rng.as_deref_mut()).map_err(in_layer(i))?;
        }
        Ok(h)
    }

    pub fn log_prob_in<'a>(
        &self,
        g: &mut Graph<'a>,
        store: &'a ParamStore,
        x: Var,
        trainable: bool,
        rng: Option<&mut Rng>,
    ) -> Result<Var> {
        let (z, log_det) = self.forward_in(g, store, x, trainable, rng)?;
        let base = self.base.log_prob_var(g, store, z, trainable)?;
        Ok(g.add(base, log_det)?)
    }

    fn check_width(&self, found: usize) -> Result<()> {
        if found != self.width() {
            return Err(Error::Width { expected: self.width(), found });
        }
        Ok(())
    }

    /// Evaluation-mode forward map.
    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, Vec<f64>)> {
        self.check_width(x.cols())?;
        let mut g = Graph::new();
        let xv = g.constant_ref(x)?;
        let (z, ld) = self.forward_var(&mut g, xv, false, None)?;
        Ok((g.value(z).clone(), g.value(ld).data().to_vec()))
    }

    /// Evaluation-mode inverse map.
    pub fn inverse(&self, z: &Tensor) -> Result<Tensor> {
        self.check_width(z.cols())?;
        let mut g = Graph::new();
        let zv = g.constant_ref(z)?;
        let x = self.inverse_var(&mut g, zv, false, None)?;
        Ok(g.value(x).clone())
    }

    pub fn log_prob(&self, x: &Tensor) -> Result<Vec<f64>> {
        self.check_width(x.cols())?;
        let mut g = Graph::new();
        let xv = g.constant_ref(x)?;
        let lp = self.log_prob_var(&mut g, xv, false, None)?;
        Ok(g.value(lp).data().to_vec())
    }

    pub fn base_log_prob(&self, z: &Tensor) -> Result<Vec<f64>> {
        self.check_width(z.cols())?;
        let mut g = Graph::new();
        let zv = g.constant_ref(z)?;
        let lp = self.base_log_prob_var(&mut g, zv)?;
        Ok(g.value(lp).data().to_vec())
    }

    pub fn base_sample(&self, n: usize, rng: &mut Rng) -> Tensor {
        self.base.sample(&self.store, n, rng)
    }

    /// Adds `U(-amplitude, amplitude)` noise to every parameter, moving the
    /// model away from the identity initialization.
    pub fn jitter(&mut self, amplitude: f64, seed: u64) {
        use rand::Rng as _;
        let mut rng = crate::rng_stream(seed, 0xf10e_0003);
        for (_, p) in self.store.iter_mut() {
            for v in p.value_mut().data_mut() {
                *v += rng.random_range(-amplitude..amplitude);
            }
        }
    }
}

/// Settings for plain maximum-likelihood training.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityTraining {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

/// Fits `flow` to `x` by minimizing the mean negative log-likelihood with Adam.
/// Returns the per-epoch mean loss.
pub fn train_density(flow: &mut FlowModel, x: &Tensor, opts: &DensityTraining) -> Result<Vec<f64>> {
    flow.check_width(x.cols())?;
    let mut adam = AdamState::new(&flow.store, opts.lr);
    let mut rng = crate::rng_stream(opts.seed, 0xf10e_0002);
    let mut order: Vec<usize> = (0..x.rows()).collect();
    let mut trace = Vec::with_capacity(opts.epochs);
    for epoch in 0..opts.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for (batch, idx) in order.chunks(opts.batch_size.max(1)).enumerate() {
            let grads = {
                let mut g = Graph::new();
                let xv = g.constant(x.select_rows(idx))?;
                let lp = flow.log_prob_var(&mut g, xv, true, Some(&mut rng)).map_err(|e| diverged(epoch, batch, e))?;
                let m = g.mean(lp)?;
                let loss = g.neg(m)?;
                total += g.value(loss).item();
                g.backward(loss)?
            };
            flow.store.zero_grad();
            flow.store.accumulate(&grads)?;
            adam.step(&mut flow.store)?;
            batches += 1;
        }
        trace.push(total / batches as f64);
    }
    Ok(trace)
}

pub(crate) fn diverged(epoch: usize, batch: usize, e: Error) -> Error {
    match e {
        Error::Flow { .. } | Error::Autodiff(AutodiffError::NonFinite { .. }) => {
            Error::Diverged { epoch, batch, detail: e.to_string() }
        }
        other => other,
    }
}

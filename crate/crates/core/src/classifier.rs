//! The differentiable binary predictor whose output counterfactuals must raise.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::autodiff::{AdamState, AutodiffError, Graph, ParamRecord, ParamStore, Tensor, Var};
use crate::nn::Mlp;
use crate::{Error, Result};

/// Probabilities are clamped to `[CLAMP, 1 - CLAMP]` before any logarithm.
pub const CLAMP: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub hidden: Vec<usize>,
    pub dropout: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self { hidden: vec![128, 64, 64], dropout: 0.5, epochs: 10, batch_size: 64, lr: 1e-3, seed: 0 }
    }
}

impl ClassifierConfig {
    fn sizes(&self, width: usize) -> Vec<usize> {
        let mut s = vec![width];
        s.extend(&self.hidden);
        s.push(1);
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || !(self.lr > 0.0) || !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("classifier config out of range: {self:?}")));
        }
        Ok(())
    }
}

/// Feed-forward network ending in one sigmoid unit.
#[derive(Clone, Debug, PartialEq)]
pub struct Classifier {
    pub config: ClassifierConfig,
    net: Mlp,
    store: ParamStore,
}

/// Serialized classifier: configuration, input width and parameter arrays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierState {
    pub config: ClassifierConfig,
    pub width: usize,
    pub params: Vec<ParamRecord>,
}

/// Per-epoch mean training loss.
pub type LossTrace = Vec<f64>;

impl Classifier {
    pub fn new(width: usize, config: &ClassifierConfig) -> Self {
        let mut rng = crate::rng_stream(config.seed, 0xc1a5_0001);
        let mut store = ParamStore::new();
        let net = Mlp::new(&mut store, "classifier", &config.sizes(width), config.dropout, false, &mut rng);
        Self { config: config.clone(), net, store }
    }

    /// Every weight and bias zero: predicts 0.5 everywhere.
    pub fn zeros(width: usize, config: &ClassifierConfig) -> Self {
        let mut c = Self::new(width, config);
        for (_, p) in c.store.iter_mut() {
            p.value_mut().data_mut().fill(0.0);
        }
        c
    }

    pub fn width(&self) -> usize {
        self.net.inputs()
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn state(&self) -> ClassifierState {
        ClassifierState { config: self.config.clone(), width: self.width(), params: self.store.to_records() }
    }

    pub fn from_state(state: &ClassifierState) -> Result<Self> {
        let mut c = Self::new(state.width, &state.config);
        c.store.load_records(&state.params)?;
        Ok(c)
    }

    /// Probability column (`n x 1`) for `x`, in evaluation mode. With
    /// `trainable = false` the weights are frozen but gradients still reach `x`.
    pub fn probability<'a>(&'a self, g: &mut Graph<'a>, x: Var, trainable: bool) -> Result<Var, AutodiffError> {
        let logit = self.net.forward(g, &self.store, x, trainable, None)?;
        g.sigmoid(logit)
    }

    /// Mean binary cross-entropy of the network on `(x, y)`, with dropout when
    /// `rng` is given.
    pub fn loss<'a>(
        &'a self,
        g: &mut Graph<'a>,
        x: Var,
        labels: &[u8],
        rng: Option<&mut crate::Rng>,
    ) -> Result<Var, AutodiffError> {
        self.loss_in(g, &self.store, x, labels, rng)
    }

    /// [`Classifier::loss`] with parameters read from `store`, which must have
    /// this classifier's layout.
    pub fn loss_in<'a>(
        &self,
        g: &mut Graph<'a>,
        store: &'a ParamStore,
        x: Var,
        labels: &[u8],
        rng: Option<&mut crate::Rng>,
    ) -> Result<Var, AutodiffError> {
        let logit = self.net.forward(g, store, x, true, rng)?;
        let p = g.sigmoid(logit)?;
        bce(g, p, labels)
    }

    pub fn predict(&self, x: &Tensor) -> Result<Vec<f64>> {
        self.check_width(x.cols())?;
        let mut g = Graph::new();
        let xv = g.constant_ref(x)?;
        let p = self.probability(&mut g, xv, false)?;
        Ok(g.value(p).data().to_vec())
    }

    pub(crate) fn check_width(&self, found: usize) -> Result<()> {
        if found != self.width() {
            return Err(Error::Width { expected: self.width(), found });
        }
        Ok(())
    }
}

/// `-mean(y log p + (1 - y) log(1 - p))` with `p` clamped.
pub fn bce<'a>(g: &mut Graph<'a>, p: Var, labels: &[u8]) -> Result<Var, AutodiffError> {
    let n = labels.len();
    let y = Tensor::new(n, 1, labels.iter().map(|&v| v as f64).collect())?;
    let not_y = y.map(|v| 1.0 - v);
    let pc = g.clamp(p, CLAMP, 1.0 - CLAMP)?;
    let log_p = g.log(pc)?;
    let neg = g.neg(pc)?;
    let q = g.add_scalar(neg, 1.0)?;
    let log_q = g.log(q)?;
    let a = g.mask(log_p, y)?;
    let b = g.mask(log_q, not_y)?;
    let s = g.add(a, b)?;
    let m = g.mean(s)?;
    g.neg(m)
}

/// Adam on mean BCE over shuffled mini-batches. Returns the model and the
/// per-epoch mean batch loss.
pub fn train_classifier(x: &Tensor, labels: &[u8], config: &ClassifierConfig) -> Result<(Classifier, LossTrace)> {
    config.validate()?;
    if x.rows() != labels.len() || x.rows() == 0 {
        return Err(Error::Config(format!("{} rows but {} labels", x.rows(), labels.len())));
    }
    if let Some(&first) = labels.first() {
        if labels.iter().all(|&y| y == first) {
            return Err(Error::SingleClass(first));
        }
    }
    let mut model = Classifier::new(x.cols(), config);
    let mut adam = AdamState::new(&model.store, config.lr);
    let mut rng = crate::rng_stream(config.seed, 0xc1a5_0002);
    let mut order: Vec<usize> = (0..x.rows()).collect();
    let mut trace = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for (batch, idx) in order.chunks(config.batch_size).enumerate() {
            let xb = x.select_rows(idx);
            let yb: Vec<u8> = idx.iter().map(|&i| labels[i]).collect();
            let grads = {
                let mut g = Graph::new();
                let xv = g.constant(xb)?;
                let loss = model.loss(&mut g, xv, &yb, Some(&mut rng)).map_err(|e| diverged(epoch, batch, e))?;
                total += g.value(loss).item();
                g.backward(loss)?
            };
            model.store.zero_grad();
            model.store.accumulate(&grads)?;
            adam.step(&mut model.store)?;
            batches += 1;
        }
        trace.push(total / batches as f64);
    }
    Ok((model, trace))
}

fn diverged(epoch: usize, batch: usize, e: AutodiffError) -> Error {
    match e {
        AutodiffError::NonFinite { .. } => Error::Diverged { epoch, batch, detail: e.to_string() },
        other => other.into(),
    }
}

/// Fraction of rows where `p > 0.5` agrees with the label.
pub fn accuracy(probs: &[f64], labels: &[u8]) -> f64 {
    let hits = probs.iter().zip(labels).filter(|(p, y)| (**p > 0.5) == (**y == 1)).count();
    hits as f64 / labels.len().max(1) as f64
}

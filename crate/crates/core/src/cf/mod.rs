//! Counterfactual training objective and generation.
//!
//! Training pushes each batch through the flow, perturbs the latent codes with
//! unit Gaussian noise and maps them back; the flow is updated so that the
//! perturbed samples stay likely, score higher under the frozen classifier and
//! stay close to their source rows. Generation then needs no optimization:
//! `x_cf = g^-1(g(x) + sqrt(t) * eps)` for `M` draws of `eps`.

mod loss;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use loss::{
    loss_mon, loss_nll, loss_validity, loss_wprox, objective, total_loss, LossTerms, LossWeights, Objective, StepNoise,
};

use crate::autodiff::{AdamState, Graph, Tensor};
use crate::classifier::Classifier;
use crate::encoding::{FeatureEncoder, RawRow};
use crate::flow::{FlowConfig, FlowModel};
use crate::parallel::{try_map_indexed, Execution};
use crate::{Error, Result, Rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    /// Run the counterfactual pass with dropout on. The likelihood pass always
    /// trains with dropout.
    pub cf_dropout: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 10, batch_size: 64, lr: 1e-3, seed: 0, cf_dropout: false }
    }
}

/// Per-epoch means of each objective term (zero for disabled terms).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub total: Vec<f64>,
    pub nll: Vec<f64>,
    pub validity: Vec<f64>,
    pub proximity: Vec<f64>,
    pub mon: Vec<f64>,
}

fn noise(rows: usize, cols: usize, scale: f64, rng: &mut Rng) -> Tensor {
    let data = (0..rows * cols)
        .map(|_| {
            let e: f64 = StandardNormal.sample(rng);
            e * scale
        })
        .collect();
    Tensor::new(rows, cols, data).expect("shape from sizes")
}

/// Trains a fresh flow on the encoded training matrix against a frozen classifier.
pub fn train_fastdcflow(
    x: &Tensor,
    classifier: &Classifier,
    flow_config: &FlowConfig,
    weights: &LossWeights,
    config: &TrainConfig,
) -> Result<(FlowModel, TrainTrace)> {
    let width = x.cols();
    classifier.check_width(width)?;
    weights.validate(width)?;
    if config.epochs == 0 || config.batch_size == 0 || !(config.lr > 0.0) || x.rows() == 0 {
        return Err(Error::Config(format!("training config out of range: {config:?} on {} rows", x.rows())));
    }
    let mut flow = FlowModel::new(width, flow_config)?;
    let mut adam = AdamState::new(flow.params(), config.lr);
    let mut order_rng = crate::rng_stream(config.seed, 0xcf_0001);
    let mut nll_rng = crate::rng_stream(config.seed, 0xcf_0002);
    let mut cf_rng = crate::rng_stream(config.seed, 0xcf_0003);
    let mut noise_rng = crate::rng_stream(config.seed, 0xcf_0004);
    let mut order: Vec<usize> = (0..x.rows()).collect();
    let mut trace = TrainTrace::default();

    for epoch in 0..config.epochs {
        order.shuffle(&mut order_rng);
        let mut sums = [0.0; 5];
        let mut batches = 0;
        for (batch, idx) in order.chunks(config.batch_size).enumerate() {
            let step_noise = StepNoise {
                noise: noise(idx.len(), width, 1.0, &mut noise_rng),
                nll_rng: Some(&mut nll_rng),
                cf_rng: config.cf_dropout.then_some(&mut cf_rng),
            };
            let grads = {
                let mut g = Graph::new();
                let xb = g.constant(x.select_rows(idx))?;
                let obj = objective(&mut g, &flow, flow.params(), classifier, xb, weights, step_noise)
                    .map_err(|e| crate::flow::diverged(epoch, batch, e))?;
                let value = |v: Option<_>| v.map_or(0.0, |v| g.value(v).item());
                let parts = [value(Some(obj.total)), value(Some(obj.nll)), value(obj.validity), value(obj.proximity), value(obj.mon)];
                for (s, p) in sums.iter_mut().zip(parts) {
                    *s += p;
                }
                g.backward(obj.total)?
            };
            let store = flow.params_mut();
            store.zero_grad();
            store.accumulate(&grads)?;
            adam.step(store).map_err(|e| crate::flow::diverged(epoch, batch, e.into()))?;
            batches += 1;
        }
        let mean = |s: f64| s / batches as f64;
        trace.total.push(mean(sums[0]));
        trace.nll.push(mean(sums[1]));
        trace.validity.push(mean(sums[2]));
        trace.proximity.push(mean(sums[3]));
        trace.mon.push(mean(sums[4]));
        if !trace.total.last().is_some_and(|v| v.is_finite()) {
            return Err(Error::Diverged { epoch, batch: batches, detail: "non-finite epoch loss".into() });
        }
    }
    Ok((flow, trace))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    /// Counterfactuals per input.
    pub m: usize,
    /// Latent noise variance.
    pub temperature: f64,
    pub seed: u64,
    /// Decode counterfactuals back to raw rows.
    pub decode: bool,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self { m: 100, temperature: 1.0, seed: 0, decode: true }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(Error::Config(format!("need m >= 1 and temperature >= 0, got {self:?}")));
        }
        Ok(())
    }
}

/// Decoded counterfactuals of one input, re-encoded and re-scored so that the
/// reported numbers describe exactly the rows shown.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodedSet {
    pub rows: Vec<RawRow>,
    pub probabilities: Vec<f64>,
    pub log_probs: Vec<f64>,
}

/// The `M` counterfactuals generated for one input.
///
/// `encoded`, `probabilities` and `log_probs` describe the flow outputs in
/// model space and are what the metrics use.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CfSet {
    pub input_id: usize,
    pub input: Vec<f64>,
    pub input_probability: f64,
    pub encoded: Tensor,
    pub probabilities: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub decoded: Option<DecodedSet>,
}

impl CfSet {
    pub fn m(&self) -> usize {
        self.encoded.rows()
    }

    pub fn decoded(&self) -> Result<&DecodedSet> {
        self.decoded.as_ref().ok_or(Error::DecodeDisabled)
    }
}

/// Counterfactual sets for every row of `inputs` (encoded). Input `i` draws
/// its noise from stream `i` of `config.seed`, so results do not depend on
/// scheduling and identical inputs get identical sets.
pub fn generate_cfs(
    flow: &FlowModel,
    classifier: &Classifier,
    encoder: Option<&FeatureEncoder>,
    inputs: &Tensor,
    config: &GenerationConfig,
    exec: Execution,
) -> Result<Vec<CfSet>> {
    config.validate()?;
    let ids: Vec<usize> = (0..inputs.rows()).collect();
    generate_cfs_with_ids(flow, classifier, encoder, inputs, &ids, config, exec)
}

/// [`generate_cfs`] with caller-chosen input ids; the noise stream follows the id.
pub fn generate_cfs_with_ids(
    flow: &FlowModel,
    classifier: &Classifier,
    encoder: Option<&FeatureEncoder>,
    inputs: &Tensor,
    ids: &[usize],
    config: &GenerationConfig,
    exec: Execution,
) -> Result<Vec<CfSet>> {
    config.validate()?;
    classifier.check_width(inputs.cols())?;
    if ids.len() != inputs.rows() {
        return Err(Error::Config(format!("{} ids for {} inputs", ids.len(), inputs.rows())));
    }
    if config.decode && encoder.is_none() {
        return Err(Error::DecodeDisabled);
    }
    let encoder = encoder.filter(|_| config.decode);
    let input_probs = classifier.predict(inputs)?;
    try_map_indexed(inputs.rows(), exec, |i| {
        let mut rng = crate::rng_stream(config.seed, ids[i] as u64);
        generate_one(flow, classifier, encoder, inputs.row_slice(i), ids[i], input_probs[i], config, &mut rng)
    })
}

#[allow(clippy::too_many_arguments)]
fn generate_one(
    flow: &FlowModel,
    classifier: &Classifier,
    encoder: Option<&FeatureEncoder>,
    x: &[f64],
    input_id: usize,
    input_probability: f64,
    config: &GenerationConfig,
    rng: &mut Rng,
) -> Result<CfSet> {
    let k = x.len();
    let (z, _) = flow.forward(&Tensor::row(x))?;
    let mut zs = noise(config.m, k, config.temperature.sqrt(), rng);
    for r in 0..config.m {
        for j in 0..k {
            zs.set(r, j, zs.get(r, j) + z.data()[j]);
        }
    }
    let encoded = flow.inverse(&zs)?;
    let probabilities = classifier.predict(&encoded)?;
    let log_probs = flow.log_prob(&encoded)?;
    let decoded = encoder
        .map(|enc| -> Result<DecodedSet> {
            let rows: Vec<RawRow> =
                enc.inverse(&encoded)?.into_iter().map(|r| r.iter().map(|c| c.to_value()).collect()).collect();
            let again = enc.transform(&rows)?;
            Ok(DecodedSet { probabilities: classifier.predict(&again)?, log_probs: flow.log_prob(&again)?, rows })
        })
        .transpose()?;
    Ok(CfSet { input_id, input: x.to_vec(), input_probability, encoded, probabilities, log_probs, decoded })
}

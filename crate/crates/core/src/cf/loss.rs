use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, ParamStore, Tensor, Var};
use crate::classifier::{Classifier, CLAMP};
use crate::flow::FlowModel;
use crate::{Error, Result, Rng};

/// Which optional terms enter the objective; the likelihood term is always present.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossTerms {
    pub validity: bool,
    /// Weighted proximity and, when monotone features are set, the hinge term.
    pub proximity: bool,
}

impl Default for LossTerms {
    fn default() -> Self {
        Self { validity: true, proximity: true }
    }
}

/// Weights of the counterfactual objective
/// `lambda * L_nll + L_y + L_wprox + mon_weight * L_mon`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub lambda: f64,
    /// Per encoded column; empty means all ones.
    pub weights: Vec<f64>,
    /// Encoded columns that counterfactuals should not decrease.
    pub monotonic: Vec<usize>,
    pub mon_weight: f64,
    pub terms: LossTerms,
    /// Class whose probability is pushed up.
    pub target_class: u8,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda: 0.01,
            weights: Vec::new(),
            monotonic: Vec::new(),
            mon_weight: 1.0,
            terms: LossTerms::default(),
            target_class: 1,
        }
    }
}

impl LossWeights {
    pub fn validate(&self, width: usize) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if !self.weights.is_empty() && self.weights.len() != width {
            return Err(Error::Width { expected: width, found: self.weights.len() });
        }
        if let Some(w) = self.weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return bad(format!("proximity weights must be > 0, got {w}"));
        }
        if let Some(d) = self.monotonic.iter().find(|&&d| d >= width) {
            return bad(format!("monotonic column {d} out of range for width {width}"));
        }
        if !(self.mon_weight >= 0.0) || self.target_class > 1 {
            return bad("mon_weight must be >= 0 and target_class 0 or 1".into());
        }
        Ok(())
    }

    pub fn weight_vector(&self, width: usize) -> Vec<f64> {
        if self.weights.is_empty() {
            vec![1.0; width]
        } else {
            self.weights.clone()
        }
    }
}

/// `-mean log p(x)`.
pub fn loss_nll<'a>(
    g: &mut Graph<'a>,
    flow: &FlowModel,
    store: &'a ParamStore,
    x: Var,
    rng: Option<&mut Rng>,
) -> Result<Var> {
    let lp = flow.log_prob_in(g, store, x, true, rng)?;
    let m = g.mean(lp)?;
    Ok(g.neg(m)?)
}

/// `-mean log f(x_cf)` (or `-mean log(1 - f)` for target class 0), clamped.
pub fn loss_validity<'a>(g: &mut Graph<'a>, prob: Var, target_class: u8) -> Result<Var> {
    let p = if target_class == 1 {
        prob
    } else {
        let n = g.neg(prob)?;
        g.add_scalar(n, 1.0)?
    };
    let pc = g.clamp(p, CLAMP, 1.0 - CLAMP)?;
    let lg = g.log(pc)?;
    let m = g.mean(lg)?;
    Ok(g.neg(m)?)
}

/// Mean over rows of `|| w * (x - x_cf) ||^2`.
pub fn loss_wprox<'a>(g: &mut Graph<'a>, x: Var, x_cf: Var, w: &[f64]) -> Result<Var> {
    let cols = g.value(x).cols();
    if w.len() != cols {
        return Err(Error::Width { expected: cols, found: w.len() });
    }
    let d = g.sub(x, x_cf)?;
    let wd = g.mask(d, Tensor::row(w))?;
    let sq = g.square(wd)?;
    let per_row = g.sum_cols(sq)?;
    Ok(g.mean(per_row)?)
}

/// `sum_i sum_{d in D} max(x_id - x_cf_id, 0) / (|D| N)`; a zero constant when `D` is empty.
pub fn loss_mon<'a>(g: &mut Graph<'a>, x: Var, x_cf: Var, monotonic: &[usize]) -> Result<Var> {
    if monotonic.is_empty() {
        return Ok(g.constant(Tensor::scalar(0.0))?);
    }
    let cols = g.value(x).cols();
    let mut sel = vec![0.0; cols];
    for &d in monotonic {
        sel[d] = 1.0;
    }
    let d = g.sub(x, x_cf)?;
    let h = g.relu(d)?;
    let h = g.mask(h, Tensor::row(&sel))?;
    let s = g.sum(h)?;
    let n = g.value(x).rows();
    Ok(g.scale(s, 1.0 / (monotonic.len() * n) as f64)?)
}

/// Scalar nodes of one objective evaluation.
#[derive(Clone, Copy, Debug)]
pub struct Objective {
    pub total: Var,
    pub nll: Var,
    pub validity: Option<Var>,
    pub proximity: Option<Var>,
    pub mon: Option<Var>,
}

/// `lambda * nll + validity + proximity + mon_weight * mon` over existing nodes.
pub fn total_loss<'a>(
    g: &mut Graph<'a>,
    weights: &LossWeights,
    nll: Var,
    validity: Option<Var>,
    proximity: Option<Var>,
    mon: Option<Var>,
) -> Result<Var> {
    let mut total = g.scale(nll, weights.lambda)?;
    for (term, k) in [(validity, 1.0), (proximity, 1.0), (mon, weights.mon_weight)] {
        if let Some(v) = term {
            let s = g.scale(v, k)?;
            total = g.add(total, s)?;
        }
    }
    Ok(total)
}

/// Random inputs for one training step: dropout streams and the latent noise.
pub struct StepNoise<'r> {
    pub noise: Tensor,
    /// Dropout in the likelihood pass.
    pub nll_rng: Option<&'r mut Rng>,
    /// Dropout in the counterfactual pass; `None` runs it in evaluation mode.
    pub cf_rng: Option<&'r mut Rng>,
}

/// The full training objective on one batch: the likelihood of `x`, plus the
/// terms on `x_cf = g^-1(g(x) + noise)` scored by the frozen classifier.
pub fn objective<'a>(
    g: &mut Graph<'a>,
    flow: &FlowModel,
    store: &'a ParamStore,
    classifier: &'a Classifier,
    x: Var,
    weights: &LossWeights,
    noise: StepNoise<'_>,
) -> Result<Objective> {
    let width = g.value(x).cols();
    classifier.check_width(width)?;
    let StepNoise { noise, nll_rng, mut cf_rng } = noise;
    let nll = loss_nll(g, flow, store, x, nll_rng)?;
    let (z, _) = flow.forward_in(g, store, x, true, cf_rng.as_deref_mut())?;
    let eps = g.constant(noise)?;
    let zs = g.add(z, eps)?;
    let x_cf = flow.inverse_in(g, store, zs, true, cf_rng)?;
    let validity = if weights.terms.validity {
        let p = classifier.probability(g, x_cf, false)?;
        Some(loss_validity(g, p, weights.target_class)?)
    } else {
        None
    };
    let (proximity, mon) = if weights.terms.proximity {
        let prox = loss_wprox(g, x, x_cf, &weights.weight_vector(width))?;
        let mon = (!weights.monotonic.is_empty()).then(|| loss_mon(g, x, x_cf, &weights.monotonic)).transpose()?;
        (Some(prox), mon)
    } else {
        (None, None)
    };
    let total = total_loss(g, weights, nll, validity, proximity, mon)?;
    Ok(Objective { total, nll, validity, proximity, mon })
}

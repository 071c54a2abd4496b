use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::autodiff::{AutodiffError, Graph, ParamId, ParamStore, Tensor, Var};
use crate::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseConfig {
    StandardNormal,
    /// Equal-weight spherical Gaussians with unit covariance and learnable means,
    /// initialized at `±1/sqrt(K)` along the all-ones direction (alternating sign).
    Mixture { components: usize },
}

impl Default for BaseConfig {
    fn default() -> Self {
        BaseConfig::Mixture { components: 2 }
    }
}

/// Base density of the flow. Component weights are fixed and uniform.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaseDensity {
    pub config: BaseConfig,
    /// One `1 x K` mean per component; empty for the standard normal.
    pub means: Vec<ParamId>,
    pub width: usize,
}

impl BaseDensity {
    pub fn new(store: &mut ParamStore, config: BaseConfig, width: usize) -> Self {
        let means = match config {
            BaseConfig::StandardNormal => Vec::new(),
            BaseConfig::Mixture { components } => (0..components)
                .map(|c| {
                    let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
                    // further components spread out along the same direction
                    let scale = sign * (1 + c / 2) as f64 / (width as f64).sqrt();
                    store.add(format!("base.mean.{c}"), Tensor::filled(1, width, scale))
                })
                .collect(),
        };
        Self { config, means, width }
    }

    fn norm_const(&self) -> f64 {
        -0.5 * self.width as f64 * (2.0 * PI).ln()
    }

    /// Per-row log-density (`n x 1`).
    pub fn log_prob_var<'a>(&self, g: &mut Graph<'a>, store: &'a ParamStore, z: Var, trainable: bool) -> Result<Var, AutodiffError> {
        if self.means.is_empty() {
            let sq = g.square(z)?;
            let s = g.sum_cols(sq)?;
            let h = g.scale(s, -0.5)?;
            return g.add_scalar(h, self.norm_const());
        }
        let log_w = -(self.means.len() as f64).ln();
        let mut cols = Vec::with_capacity(self.means.len());
        for &id in &self.means {
            let mu = g.param(store, id, trainable)?;
            let neg_mu = g.neg(mu)?;
            let d = g.add_row(z, neg_mu)?;
            let sq = g.square(d)?;
            let s = g.sum_cols(sq)?;
            let h = g.scale(s, -0.5)?;
            cols.push(g.add_scalar(h, self.norm_const() + log_w)?);
        }
        let all = g.concat_cols(&cols)?;
        g.logsumexp_cols(all)
    }

    /// `n` draws: a uniformly chosen component plus standard normal noise.
    pub fn sample(&self, store: &ParamStore, n: usize, rng: &mut Rng) -> Tensor {
        let mut out = Tensor::zeros(n, self.width);
        for i in 0..n {
            let mean = (!self.means.is_empty()).then(|| store.value(self.means[rng.random_range(0..self.means.len())]));
            for j in 0..self.width {
                let e: f64 = StandardNormal.sample(rng);
                out.set(i, j, e + mean.map_or(0.0, |m| m.data()[j]));
            }
        }
        out
    }
}

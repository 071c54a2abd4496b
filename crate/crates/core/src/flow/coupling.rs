use serde::{Deserialize, Serialize};

use crate::autodiff::{AutodiffError, Graph, ParamId, ParamStore, Tensor, Var};
use crate::nn::Mlp;
use crate::Rng;

/// Affine coupling: coordinates where `mask = 1` pass through and condition
/// the scale `s` and shift `t` applied to the others,
/// `z = x * exp(s) + t` with `s = bound * tanh(S(x * mask)) * (1 - mask)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    /// `1 x K`, 1 on the conditioning coordinates.
    pub mask: Tensor,
    pub scale: Mlp,
    pub shift: Mlp,
    /// `1 x K` learnable bound on `|s|`.
    pub bound: ParamId,
}

/// Conditioning mask of layer `index`: the first `K/2` coordinates for even
/// layers, the rest for odd layers.
pub fn alternating_mask(width: usize, index: usize) -> Tensor {
    let half = width / 2;
    let data = (0..width).map(|j| if (j < half) == index.is_multiple_of(2) { 1.0 } else { 0.0 }).collect();
    Tensor::new(1, width, data).expect("row shape")
}

impl Coupling {
    pub(super) fn complement(&self) -> Tensor {
        self.mask.map(|m| 1.0 - m)
    }

    /// `(s, t)` computed from the conditioning coordinates of `x`, both zero on them.
    fn scale_shift<'a>(
        &self,
        g: &mut Graph<'a>,
        store: &'a ParamStore,
        x: Var,
        trainable: bool,
        mut rng: Option<&mut Rng>,
    ) -> Result<(Var, Var), AutodiffError> {
        let keep = g.mask(x, self.mask.clone())?;
        let raw = self.scale.forward(g, store, keep, trainable, rng.as_deref_mut())?;
        let th = g.tanh(raw)?;
        let bound = g.param(store, self.bound, trainable)?;
        let s = g.mul_row(th, bound)?;
        let s = g.mask(s, self.complement())?;
        let t = self.shift.forward(g, store, keep, trainable, rng)?;
        let t = g.mask(t, self.complement())?;
        Ok((s, t))
    }

    /// Returns `z` and the per-row log-determinant (`n x 1`).
    pub fn forward<'a>(
        &self,
        g: &mut Graph<'a>,
        store: &'a ParamStore,
        x: Var,
        trainable: bool,
        rng: Option<&mut Rng>,
    ) -> Result<(Var, Var), AutodiffError> {
        let (s, t) = self.scale_shift(g, store, x, trainable, rng)?;
        let es = g.exp(s)?;
        let xs = g.mul(x, es)?;
        let z = g.add(xs, t)?;
        let log_det = g.sum_cols(s)?;
        Ok((z, log_det))
    }

    pub fn inverse<'a>(
        &self,
        g: &mut Graph<'a>,
        store: &'a ParamStore,
        z: Var,
        trainable: bool,
        rng: Option<&mut Rng>,
    ) -> Result<Var, AutodiffError> {
        let (s, t) = self.scale_shift(g, store, z, trainable, rng)?;
        let d = g.sub(z, t)?;
        let ns = g.neg(s)?;
        let e = g.exp(ns)?;
        g.mul(d, e)
    }
}

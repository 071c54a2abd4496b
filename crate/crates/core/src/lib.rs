//! Counterfactual explanations for tabular binary classifiers.
//!
//! A RealNVP flow is trained over standardized, target-encoded features so that
//! perturbing an input's latent code and mapping it back yields nearby
//! samples the classifier scores higher. Generation for a new input is then a
//! single forward pass, a Gaussian perturbation in latent space, and an inverse
//! pass, with categorical coordinates snapped back to their nearest level.
//!
//! Modules, bottom up:
//!
//! * [`autodiff`]: reverse-mode differentiation, Adam, gradient checking
//! * [`encoding`]: schema, CSV ingestion, target / one-hot encoding
//! * [`classifier`]: the frozen differentiable predictor
//! * [`flow`]: coupling layers, base density, exact log-likelihood
//! * [`cf`]: training objective and counterfactual generation
//! * [`metrics`]: diversity, proximity, validity, constraint accuracies
//! * [`pipeline`]: checkpoints, artifacts and the experiment drivers

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Test oracles index on purpose to mirror the formulas term by term.
#![cfg_attr(test, allow(clippy::needless_range_loop))]

pub mod autodiff;
pub mod cf;
pub mod classifier;
pub mod encoding;
mod error;
pub mod flow;
pub mod metrics;
pub mod nn;
pub mod parallel;
pub mod pipeline;

pub use error::{Error, Result};

/// RNG used everywhere a seed is accepted. Streams are selected with
/// `set_stream` so per-item randomness is independent of scheduling.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Seeded RNG on a given stream.
pub fn rng_stream(seed: u64, stream: u64) -> Rng {
    use rand::SeedableRng;
    let mut rng = Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

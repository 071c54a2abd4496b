//! Evaluation of counterfactual sets.
//!
//! Diversity (ID, OD), proximity (P) and validity (V) are computed on the
//! model-space vectors; fix and monotonicity accuracy (FA, MA) on decoded raw
//! rows. Per-input values are computed independently and then reduced in
//! input order, so results do not depend on the execution mode.

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::encoding::{RawRow, Value};
use crate::parallel::{try_map_indexed, Execution};
use crate::{Error, Result};

/// Relative tolerance for treating raw continuous values as equal.
pub const RAW_EQ_TOL: f64 = 1e-6;

/// Mean and population standard deviation over inputs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Stat { mean, std: var.sqrt() }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `sqrt(|a|^2 |b|^2)` keeps the cosine of a vector with itself exactly 1.
fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    let (aa, bb) = (dot(a, a), dot(b, b));
    if aa == 0.0 || bb == 0.0 {
        return Err(Error::Metric("cosine similarity of a zero vector".into()));
    }
    Ok(dot(a, b) / (aa * bb).sqrt())
}

/// Per input: minus the mean cosine similarity over pairs `j < k` of its set.
pub fn inner_diversity(sets: &[Tensor], exec: Execution) -> Result<Stat> {
    if sets.is_empty() {
        return Err(Error::Metric("no counterfactual sets".into()));
    }
    let per = try_map_indexed::<f64, Error, _>(sets.len(), exec, |i| {
        let s = &sets[i];
        let m = s.rows();
        if m < 2 {
            return Err(Error::Metric(format!("inner diversity needs M >= 2, set {i} has {m}")));
        }
        let mut total = 0.0;
        for j in 0..m {
            for k in j + 1..m {
                total += cosine(s.row_slice(j), s.row_slice(k))?;
            }
        }
        Ok(-total / (m * (m - 1) / 2) as f64)
    })?;
    Ok(Stat::of(&per))
}

fn set_mean(s: &Tensor) -> Vec<f64> {
    let m = s.rows() as f64;
    s.sum_rows().data().iter().map(|v| v / m).collect()
}

/// Minus the mean cosine similarity between per-input mean counterfactuals.
/// The per-input value averages over all other inputs, so its mean equals the
/// pairwise mean.
pub fn outer_diversity(sets: &[Tensor], exec: Execution) -> Result<Stat> {
    let n = sets.len();
    if n < 2 {
        return Err(Error::Metric(format!("outer diversity needs at least 2 inputs, got {n}")));
    }
    let means: Vec<Vec<f64>> = sets.iter().map(set_mean).collect();
    let per = try_map_indexed::<f64, Error, _>(n, exec, |i| {
        let mut total = 0.0;
        for (l, other) in means.iter().enumerate() {
            if l != i {
                total += cosine(&means[i], other)?;
            }
        }
        Ok(-total / (n - 1) as f64)
    })?;
    Ok(Stat::of(&per))
}

/// Minus the mean Euclidean distance from each counterfactual to its input.
pub fn proximity(inputs: &Tensor, sets: &[Tensor], exec: Execution) -> Result<Stat> {
    check_pairing(inputs.rows(), sets.len())?;
    let per = try_map_indexed::<f64, Error, _>(sets.len(), exec, |i| {
        let x = inputs.row_slice(i);
        let s = &sets[i];
        if s.cols() != x.len() || s.rows() == 0 {
            return Err(Error::Width { expected: x.len(), found: s.cols() });
        }
        let total: f64 = s.row_iter().map(|c| c.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()).sum();
        Ok(-total / s.rows() as f64)
    })?;
    Ok(Stat::of(&per))
}

/// Fraction of counterfactuals whose probability strictly exceeds the input's.
pub fn validity(input_probs: &[f64], cf_probs: &[Vec<f64>]) -> Result<Stat> {
    check_pairing(input_probs.len(), cf_probs.len())?;
    let per: Vec<f64> = input_probs
        .iter()
        .zip(cf_probs)
        .map(|(&p, cs)| cs.iter().filter(|&&c| c > p).count() as f64 / cs.len().max(1) as f64)
        .collect();
    Ok(Stat::of(&per))
}

/// Seconds per input.
pub fn run_time(total_seconds: f64, n_inputs: usize) -> Result<f64> {
    if n_inputs == 0 {
        return Err(Error::Metric("run time over zero inputs".into()));
    }
    Ok(total_seconds / n_inputs as f64)
}

fn check_pairing(inputs: usize, sets: usize) -> Result<()> {
    if inputs != sets {
        return Err(Error::Metric(format!("{inputs} inputs but {sets} counterfactual sets")));
    }
    if inputs == 0 {
        return Err(Error::Metric("no inputs".into()));
    }
    Ok(())
}

/// Raw equality: levels exactly, numbers within [`RAW_EQ_TOL`] relative.
pub fn raw_equal(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Num(x), Value::Num(y)) => (x - y).abs() <= RAW_EQ_TOL * x.abs().max(y.abs()).max(1.0),
        _ => a == b,
    }
}

/// Raw strict increase beyond [`RAW_EQ_TOL`]; categorical cells never increase.
pub fn raw_increase(input: &Value, cf: &Value) -> bool {
    match (input, cf) {
        (Value::Num(x), Value::Num(y)) => y - x > RAW_EQ_TOL * x.abs().max(y.abs()).max(1.0),
        _ => false,
    }
}

fn triple_fraction(
    inputs: &[RawRow],
    sets: &[Vec<RawRow>],
    features: &[usize],
    hit: impl Fn(&Value, &Value) -> bool,
) -> Result<f64> {
    check_pairing(inputs.len(), sets.len())?;
    if features.is_empty() {
        return Err(Error::Metric("no features to check".into()));
    }
    let mut hits = 0usize;
    let mut total = 0usize;
    for (x, set) in inputs.iter().zip(sets) {
        for cf in set {
            for &d in features {
                total += 1;
                hits += usize::from(hit(&x[d], &cf[d]));
            }
        }
    }
    if total == 0 {
        return Err(Error::Metric("empty counterfactual sets".into()));
    }
    Ok(hits as f64 / total as f64)
}

/// Fraction of (input, counterfactual, fixed feature) triples left unchanged.
pub fn fix_accuracy(inputs: &[RawRow], sets: &[Vec<RawRow>], fixed: &[usize]) -> Result<f64> {
    triple_fraction(inputs, sets, fixed, raw_equal)
}

/// Fraction of (input, counterfactual, monotone feature) triples strictly increased.
pub fn monotonicity_accuracy(inputs: &[RawRow], sets: &[Vec<RawRow>], monotone: &[usize]) -> Result<f64> {
    triple_fraction(inputs, sets, monotone, raw_increase)
}

/// Prediction summary used to compare encodings.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EncodingStats {
    pub mean_input_probability: f64,
    pub mean_cf_probability: f64,
    /// Population standard deviation over inputs of the per-input mean
    /// counterfactual probability.
    pub std_cf_probability: f64,
}

pub fn encoding_report(input_probs: &[f64], cf_probs: &[Vec<f64>]) -> Result<EncodingStats> {
    check_pairing(input_probs.len(), cf_probs.len())?;
    let per_input: Vec<f64> = cf_probs.iter().map(|c| c.iter().sum::<f64>() / c.len().max(1) as f64).collect();
    let total: usize = cf_probs.iter().map(Vec::len).sum();
    let s = Stat::of(&per_input);
    Ok(EncodingStats {
        mean_input_probability: input_probs.iter().sum::<f64>() / input_probs.len() as f64,
        mean_cf_probability: cf_probs.iter().flatten().sum::<f64>() / total.max(1) as f64,
        std_cf_probability: s.std,
    })
}

/// Welch's two-sample t statistic and its Welch–Satterthwaite degrees of freedom.
pub fn two_sample_t(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Metric("t-test needs at least 2 samples per group".into()));
    }
    let moments = |x: &[f64]| {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
        (n, m, v)
    };
    let (na, ma, va) = moments(a);
    let (nb, mb, vb) = moments(b);
    let (qa, qb) = (va / na, vb / nb);
    let se2 = qa + qb;
    if se2 == 0.0 {
        return Ok((if ma == mb { 0.0 } else { (ma - mb).signum() * f64::INFINITY }, na + nb - 2.0));
    }
    let t = (ma - mb) / se2.sqrt();
    let dof = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    Ok((t, dof))
}

/// All metrics for one generation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_inputs: usize,
    pub m: usize,
    pub inner_diversity: Stat,
    pub outer_diversity: Stat,
    pub proximity: Stat,
    pub validity: Stat,
    /// Seconds per input; absent when replaying stored sets without timing.
    pub run_time: Option<f64>,
    pub fix_accuracy: Option<f64>,
    pub monotonicity_accuracy: Option<f64>,
    pub encoding: EncodingStats,
}

impl MetricsReport {
    pub const CSV_HEADER: [&'static str; 16] = [
        "n_inputs", "m", "id", "id_std", "od", "od_std", "p", "p_std", "v", "v_std", "rt", "fa", "ma",
        "mean_input_probability", "mean_cf_probability", "std_cf_probability",
    ];

    pub fn csv_row(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
        let s = |v: f64| v.to_string();
        vec![
            self.n_inputs.to_string(),
            self.m.to_string(),
            s(self.inner_diversity.mean),
            s(self.inner_diversity.std),
            s(self.outer_diversity.mean),
            s(self.outer_diversity.std),
            s(self.proximity.mean),
            s(self.proximity.std),
            s(self.validity.mean),
            s(self.validity.std),
            opt(self.run_time),
            opt(self.fix_accuracy),
            opt(self.monotonicity_accuracy),
            s(self.encoding.mean_input_probability),
            s(self.encoding.mean_cf_probability),
            s(self.encoding.std_cf_probability),
        ]
    }
}

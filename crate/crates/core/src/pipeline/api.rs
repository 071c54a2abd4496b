//! Request and response bodies of the HTTP service, and the request handlers
//! as plain functions over a loaded [`Model`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Model;
use crate::cf::{generate_cfs_with_ids, GenerationConfig};
use crate::encoding::{ColumnKind, EncoderKind, EncodingError, RawRow, Value};
use crate::metrics::raw_equal;
use crate::parallel::Execution;
use crate::{Error, Result};

/// Upper bound on `m` per request.
pub const MAX_M: usize = 10_000;
/// Upper bound on `temperature` per request.
pub const MAX_TEMPERATURE: f64 = 100.0;

pub type FeatureMap = BTreeMap<String, Value>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<String>>,
    /// Training `[min, max]` of a continuous feature.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range: Option<[f64; 2]>,
    pub weight: f64,
    pub immutable: bool,
    pub monotonic_increase: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemaResponse {
    pub target: String,
    pub positive_label: String,
    pub encoder: EncoderKind,
    pub encoded_width: usize,
    pub features: Vec<FeatureDescriptor>,
}

pub fn schema(model: &Model) -> SchemaResponse {
    let features = model
        .schema
        .columns
        .iter()
        .enumerate()
        .map(|(j, c)| FeatureDescriptor {
            name: c.name.clone(),
            kind: c.kind,
            levels: model.encoder.levels(j),
            range: model.ranges.get(j).copied().flatten(),
            weight: c.weight,
            immutable: c.immutable,
            monotonic_increase: c.monotonic_increase,
        })
        .collect();
    SchemaResponse {
        target: model.schema.target.clone(),
        positive_label: model.schema.positive_label.clone(),
        encoder: model.encoder.kind(),
        encoded_width: model.encoder.width(),
        features,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreRequest {
    pub features: FeatureMap,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub probability: f64,
}

/// Schema-ordered row from a request map; categorical values must be fitted levels.
pub fn input_row(model: &Model, features: &FeatureMap) -> Result<RawRow> {
    let row = model.schema.row_from_map(features)?;
    for (j, v) in row.iter().enumerate() {
        if let (Some(levels), Value::Cat(level)) = (model.encoder.levels(j), v) {
            if !levels.contains(level) {
                return Err(EncodingError::Cell {
                    row: 0,
                    column: model.schema.columns[j].name.clone(),
                    detail: format!("unknown level {level:?}"),
                }
                .into());
            }
        }
    }
    Ok(row)
}

pub fn score(model: &Model, req: &ScoreRequest) -> Result<ScoreResponse> {
    let row = input_row(model, &req.features)?;
    let x = model.encoder.transform(&[row])?;
    Ok(ScoreResponse { probability: model.classifier.predict(&x)?[0] })
}

/// Request-time constraints applied to decoded counterfactuals: frozen
/// features are reset to the input value and monotone features are raised
/// to at least the input value. Constrained rows are re-encoded and re-scored.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RequestConstraints {
    pub frozen: Vec<String>,
    pub monotonic_increase: Vec<String>,
}

fn default_m() -> usize {
    10
}

fn default_temperature() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CfRequest {
    pub features: FeatureMap,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Per-feature weights for the reported weighted distance; unspecified
    /// features use the schema weight.
    #[serde(default)]
    pub weights: Option<BTreeMap<String, f64>>,
    #[serde(default)]
    pub constraints: Option<RequestConstraints>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CfRow {
    pub features: FeatureMap,
    pub probability: f64,
    pub log_likelihood: f64,
    /// Features whose decoded raw value differs from the input.
    pub changed_features: Vec<String>,
    /// Weighted Euclidean distance to the input in encoded space.
    pub weighted_distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CfResponse {
    pub input_probability: f64,
    pub seed: u64,
    /// Sorted by `log_likelihood`, highest first.
    pub cfs: Vec<CfRow>,
}

/// Seed from the request or fresh entropy.
pub fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(rand::random)
}

fn feature_indices(model: &Model, names: &[String]) -> Result<Vec<usize>> {
    names.iter().map(|n| Ok(model.schema.index_of(n)?)).collect()
}

fn check_request(req: &CfRequest) -> Result<()> {
    if req.m == 0 || req.m > MAX_M {
        return Err(Error::Config(format!("m must be in 1..={MAX_M}, got {}", req.m)));
    }
    if !(0.0..=MAX_TEMPERATURE).contains(&req.temperature) {
        return Err(Error::Config(format!("temperature must be in [0, {MAX_TEMPERATURE}], got {}", req.temperature)));
    }
    Ok(())
}

pub fn counterfactuals(model: &Model, req: &CfRequest, exec: Execution) -> Result<CfResponse> {
    check_request(req)?;
    let schema = &model.schema;
    let input = input_row(model, &req.features)?;
    let mut per_feature = schema.weights();
    if let Some(w) = &req.weights {
        for (name, &v) in w {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("weight for {name} must be finite and non-negative")));
            }
            per_feature[schema.index_of(name)?] = v;
        }
    }
    let constraints = req.constraints.clone().unwrap_or_default();
    let frozen = feature_indices(model, &constraints.frozen)?;
    let monotone = feature_indices(model, &constraints.monotonic_increase)?;
    if let Some(&d) = monotone.iter().find(|&&d| schema.columns[d].kind != ColumnKind::Continuous) {
        return Err(Error::Config(format!("monotone constraint on categorical feature {}", schema.columns[d].name)));
    }

    let seed = resolve_seed(req.seed);
    let x = model.encoder.transform(std::slice::from_ref(&input))?;
    let generation = GenerationConfig { m: req.m, temperature: req.temperature, seed, decode: true };
    let set = generate_cfs_with_ids(&model.flow, &model.classifier, Some(&model.encoder), &x, &[0], &generation, exec)?
        .pop()
        .ok_or_else(|| Error::Config("generation returned no set".into()))?;

    let rows: Vec<RawRow> = set.decoded()?.rows.iter().map(|r| project(r, &input, &frozen, &monotone)).collect();
    let encoded = model.encoder.transform(&rows)?;
    let probabilities = model.classifier.predict(&encoded)?;
    let log_probs = model.flow.log_prob(&encoded)?;
    let w = model.encoder.expand(&per_feature);
    let x0 = x.row_slice(0);

    let mut cfs: Vec<CfRow> = rows
        .iter()
        .enumerate()
        .map(|(r, row)| CfRow {
            features: schema.row_to_map(row),
            probability: probabilities[r],
            log_likelihood: log_probs[r],
            changed_features: schema
                .names()
                .zip(row.iter().zip(&input))
                .filter(|(_, (c, i))| !raw_equal(i, c))
                .map(|(n, _)| n.to_string())
                .collect(),
            weighted_distance: encoded
                .row_slice(r)
                .iter()
                .zip(x0)
                .zip(&w)
                .map(|((c, i), w)| (w * (c - i)).powi(2))
                .sum::<f64>()
                .sqrt(),
        })
        .collect();
    cfs.sort_by(|a, b| b.log_likelihood.total_cmp(&a.log_likelihood));
    Ok(CfResponse { input_probability: set.input_probability, seed, cfs })
}

fn project(row: &RawRow, input: &RawRow, frozen: &[usize], monotone: &[usize]) -> RawRow {
    let mut out = row.clone();
    for &d in frozen {
        out[d] = input[d].clone();
    }
    for &d in monotone {
        if let (Value::Num(x), Value::Num(c)) = (&input[d], &out[d]) {
            if c < x {
                out[d] = Value::Num(*x);
            }
        }
    }
    out
}

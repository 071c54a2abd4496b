//! Raw tabular data to standardized model space and back.
//!
//! Target encoding replaces each categorical level with a target mean and is
//! the default. One-hot encoding exists for comparison runs. Both standardize
//! continuous columns with training statistics, and all downstream distances
//! and metrics are computed in this standardized space.

mod frame;
mod onehot;
mod schema;
mod target;

use serde::{Deserialize, Serialize};

pub use frame::{Dataset, RawRow, Value};
pub use onehot::{one_hot_encode, OneHotEncoder};
pub use schema::{ColumnKind, ColumnSpec, DatasetSchema, SchemaFile};
pub use target::{TIE_EPS, assign_folds, fit_transform_te, fit_transform_te_with_folds, LevelTable, TargetColumn, TargetEncoder};

use crate::autodiff::Tensor;

#[derive(Debug, thiserror::Error)]
pub enum EncodingError {
    #[error("schema: {0}")]
    Schema(String),
    #[error("unknown column {0}")]
    UnknownColumn(String),
    #[error("missing column {0}")]
    MissingColumn(String),
    #[error("row {row}, column {column}: {detail}")]
    Cell { row: usize, column: String, detail: String },
    #[error("csv: {0}")]
    Csv(String),
    #[error("no rows to fit")]
    Empty,
    #[error("folds: {0}")]
    Folds(String),
    #[error("column {0} is constant after encoding and cannot be standardized")]
    Degenerate(String),
    #[error("row width {found} does not match encoder width {expected}")]
    Width { expected: usize, found: usize },
}

impl EncodingError {
    pub fn code(&self) -> &'static str {
        match self {
            EncodingError::Schema(_) => "schema_invalid",
            EncodingError::UnknownColumn(_) => "unknown_column",
            EncodingError::MissingColumn(_) => "missing_column",
            EncodingError::Cell { .. } => "bad_cell",
            EncodingError::Csv(_) => "csv",
            EncodingError::Empty => "empty_data",
            EncodingError::Folds(_) => "invalid_folds",
            EncodingError::Degenerate(_) => "degenerate_column",
            EncodingError::Width { .. } => "width_mismatch",
        }
    }
}

/// Per-column affine map to zero mean and unit (population) variance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    fn fit(matrix: &Tensor, schema: &DatasetSchema) -> Result<Self, EncodingError> {
        let names: Vec<String> = schema.names().map(str::to_string).collect();
        Self::fit_named(matrix, &names)
    }

    fn fit_named(matrix: &Tensor, names: &[String]) -> Result<Self, EncodingError> {
        let n = matrix.rows() as f64;
        let mean: Vec<f64> = matrix.sum_rows().data().iter().map(|s| s / n).collect();
        let mut var = vec![0.0; matrix.cols()];
        for row in matrix.row_iter() {
            for ((v, x), m) in var.iter_mut().zip(row).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let std: Vec<f64> = var.iter().map(|v| (v / n).sqrt()).collect();
        if let Some(j) = std.iter().position(|&s| !(s > 1e-12)) {
            let name = names.get(j).cloned().unwrap_or_else(|| format!("#{j}"));
            return Err(EncodingError::Degenerate(name));
        }
        Ok(Self { mean, std })
    }

    pub fn apply(&self, j: usize, x: f64) -> f64 {
        (x - self.mean[j]) / self.std[j]
    }

    pub fn invert(&self, j: usize, z: f64) -> f64 {
        z * self.std[j] + self.mean[j]
    }

    fn apply_in_place(&self, m: &mut Tensor) {
        let cols = m.cols();
        for (i, v) in m.data_mut().iter_mut().enumerate() {
            let j = i % cols;
            *v = (*v - self.mean[j]) / self.std[j];
        }
    }
}

/// A decoded model-space coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DecodedCell {
    Categorical { level: String, encoded: f64 },
    Continuous(f64),
}

impl DecodedCell {
    pub fn to_value(&self) -> Value {
        match self {
            DecodedCell::Categorical { level, .. } => Value::Cat(level.clone()),
            DecodedCell::Continuous(x) => Value::Num(*x),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    #[default]
    Te,
    Ohe,
}

impl std::str::FromStr for EncoderKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "te" => Ok(EncoderKind::Te),
            "ohe" => Ok(EncoderKind::Ohe),
            other => Err(format!("unknown encoder {other:?} (expected te or ohe)")),
        }
    }
}

/// Either encoder behind one interface.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureEncoder {
    Te(TargetEncoder),
    Ohe(OneHotEncoder),
}

impl FeatureEncoder {
    /// Fits on training data and returns the encoded training matrix.
    pub fn fit(kind: EncoderKind, data: &Dataset, schema: &DatasetSchema, k_folds: usize, seed: u64) -> Result<(Tensor, Self), EncodingError> {
        match kind {
            EncoderKind::Te => {
                let (m, e) = fit_transform_te(data, schema, k_folds, seed)?;
                Ok((m, FeatureEncoder::Te(e)))
            }
            EncoderKind::Ohe => {
                let e = OneHotEncoder::fit(data, schema)?;
                Ok((e.transform(&data.rows)?, FeatureEncoder::Ohe(e)))
            }
        }
    }

    pub fn kind(&self) -> EncoderKind {
        match self {
            FeatureEncoder::Te(_) => EncoderKind::Te,
            FeatureEncoder::Ohe(_) => EncoderKind::Ohe,
        }
    }

    pub fn width(&self) -> usize {
        match self {
            FeatureEncoder::Te(e) => e.width(),
            FeatureEncoder::Ohe(e) => e.width(),
        }
    }

    pub fn transform(&self, rows: &[RawRow]) -> Result<Tensor, EncodingError> {
        match self {
            FeatureEncoder::Te(e) => e.transform(rows),
            FeatureEncoder::Ohe(e) => e.transform(rows),
        }
    }

    pub fn inverse(&self, encoded: &Tensor) -> Result<Vec<Vec<DecodedCell>>, EncodingError> {
        match self {
            FeatureEncoder::Te(e) => e.inverse(encoded),
            FeatureEncoder::Ohe(e) => e.inverse(encoded),
        }
    }

    /// Fitted levels of a categorical feature in sorted order; `None` for
    /// continuous features.
    pub fn levels(&self, feature: usize) -> Option<Vec<String>> {
        match self {
            FeatureEncoder::Te(e) => match e.columns.get(feature)? {
                TargetColumn::Categorical(t) => Some(t.means.keys().cloned().collect()),
                TargetColumn::Continuous => None,
            },
            FeatureEncoder::Ohe(e) => match e.columns.get(feature)? {
                onehot::OneHotColumn::Categorical { levels } => Some(levels.clone()),
                onehot::OneHotColumn::Continuous => None,
            },
        }
    }

    /// Source feature of every encoded column.
    pub fn column_sources(&self) -> Vec<usize> {
        match self {
            FeatureEncoder::Te(e) => (0..e.width()).collect(),
            FeatureEncoder::Ohe(e) => e.column_sources(),
        }
    }

    /// Spreads per-feature values (weights, flags) over encoded columns.
    pub fn expand<T: Clone>(&self, per_feature: &[T]) -> Vec<T> {
        self.column_sources().into_iter().map(|j| per_feature[j].clone()).collect()
    }

    /// Encoded columns belonging to any of the given features.
    pub fn encoded_indices(&self, features: &[usize]) -> Vec<usize> {
        self.column_sources().into_iter().enumerate().filter(|(_, j)| features.contains(j)).map(|(c, _)| c).collect()
    }
}

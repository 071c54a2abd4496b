use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::target::{cell_cat, cell_num};
use super::{ColumnKind, Dataset, DatasetSchema, DecodedCell, EncodingError, Standardizer, Value};
use crate::autodiff::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OneHotColumn {
    Continuous,
    /// Levels in sorted order; one indicator column each.
    Categorical { levels: Vec<String> },
}

impl OneHotColumn {
    fn width(&self) -> usize {
        match self {
            OneHotColumn::Continuous => 1,
            OneHotColumn::Categorical { levels } => levels.len(),
        }
    }
}

/// One indicator per training level, continuous columns passed through; every
/// resulting column is then standardized with training statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OneHotEncoder {
    pub columns: Vec<OneHotColumn>,
    pub standardizer: Standardizer,
}

/// Fits on `rows` and returns their encoding.
pub fn one_hot_encode(rows: &[Vec<Value>], schema: &DatasetSchema) -> Result<(Tensor, OneHotEncoder), EncodingError> {
    let data = Dataset { rows: rows.to_vec(), labels: vec![0; rows.len()] };
    let enc = OneHotEncoder::fit(&data, schema)?;
    Ok((enc.transform(rows)?, enc))
}

impl OneHotEncoder {
    pub fn fit(data: &Dataset, schema: &DatasetSchema) -> Result<Self, EncodingError> {
        if data.is_empty() {
            return Err(EncodingError::Empty);
        }
        let mut columns = Vec::with_capacity(schema.len());
        let mut names = Vec::new();
        for (j, spec) in schema.columns.iter().enumerate() {
            match spec.kind {
                ColumnKind::Continuous => {
                    columns.push(OneHotColumn::Continuous);
                    names.push(spec.name.clone());
                }
                ColumnKind::Categorical => {
                    let mut levels = BTreeSet::new();
                    for (i, row) in data.rows.iter().enumerate() {
                        levels.insert(cell_cat(row, j, &spec.name, i)?);
                    }
                    names.extend(levels.iter().map(|l| format!("{}={l}", spec.name)));
                    let levels = levels.into_iter().map(str::to_string).collect();
                    columns.push(OneHotColumn::Categorical { levels });
                }
            }
        }
        let unscaled = OneHotEncoder { columns, standardizer: Standardizer { mean: Vec::new(), std: Vec::new() } };
        let raw = unscaled.raw_matrix(&data.rows)?;
        let standardizer = Standardizer::fit_named(&raw, &names)?;
        Ok(OneHotEncoder { standardizer, ..unscaled })
    }

    pub fn width(&self) -> usize {
        self.columns.iter().map(OneHotColumn::width).sum()
    }

    /// Feature index behind each encoded column.
    pub fn column_sources(&self) -> Vec<usize> {
        self.columns.iter().enumerate().flat_map(|(j, c)| std::iter::repeat_n(j, c.width())).collect()
    }

    fn raw_matrix(&self, rows: &[Vec<Value>]) -> Result<Tensor, EncodingError> {
        let mut out = Tensor::zeros(rows.len(), self.width());
        for (i, row) in rows.iter().enumerate() {
            if row.len() != self.columns.len() {
                return Err(EncodingError::Width { expected: self.columns.len(), found: row.len() });
            }
            let mut c = 0;
            for (j, col) in self.columns.iter().enumerate() {
                match col {
                    OneHotColumn::Continuous => out.set(i, c, cell_num(row, j, "", i)?),
                    OneHotColumn::Categorical { levels } => {
                        let level = cell_cat(row, j, "", i)?;
                        // unseen levels leave the block at zero
                        if let Ok(k) = levels.binary_search_by(|l| l.as_str().cmp(level)) {
                            out.set(i, c + k, 1.0);
                        }
                    }
                }
                c += col.width();
            }
        }
        Ok(out)
    }

    pub fn transform(&self, rows: &[Vec<Value>]) -> Result<Tensor, EncodingError> {
        let mut m = self.raw_matrix(rows)?;
        self.standardizer.apply_in_place(&mut m);
        Ok(m)
    }

    /// De-standardize, then take the argmax level of each block (first level on ties).
    pub fn inverse(&self, encoded: &Tensor) -> Result<Vec<Vec<DecodedCell>>, EncodingError> {
        if encoded.cols() != self.width() {
            return Err(EncodingError::Width { expected: self.width(), found: encoded.cols() });
        }
        Ok(encoded
            .row_iter()
            .map(|r| {
                let mut c = 0;
                self.columns
                    .iter()
                    .map(|col| {
                        let cell = match col {
                            OneHotColumn::Continuous => DecodedCell::Continuous(self.standardizer.invert(c, r[c])),
                            OneHotColumn::Categorical { levels } => {
                                let mut best = 0;
                                let mut best_v = f64::NEG_INFINITY;
                                for k in 0..levels.len() {
                                    let v = self.standardizer.invert(c + k, r[c + k]);
                                    if v > best_v {
                                        best = k;
                                        best_v = v;
                                    }
                                }
                                DecodedCell::Categorical { level: levels[best].clone(), encoded: best_v }
                            }
                        };
                        c += col.width();
                        cell
                    })
                    .collect()
            })
            .collect())
    }
}

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{ColumnKind, DatasetSchema, Dataset, DecodedCell, EncodingError, Standardizer, Value};
use crate::autodiff::Tensor;

/// Relative slack under which two snapping distances are considered equal, so
/// that decimal midpoints such as 0.4 between 0.2 and 0.6 snap down.
pub const TIE_EPS: f64 = 1e-12;

/// Level statistics for one categorical column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelTable {
    /// Full-training-data target mean per level.
    pub means: BTreeMap<String, f64>,
    /// Fallback for levels not seen during fitting.
    pub global_mean: f64,
    /// `(encoded mean, level)` strictly increasing in the mean. When two levels
    /// share a mean only the lexicographically smallest is kept.
    pub sorted: Vec<(f64, String)>,
}

impl LevelTable {
    pub(super) fn from_stats(stats: &BTreeMap<String, (f64, usize)>, global_mean: f64) -> Self {
        let means: BTreeMap<String, f64> =
            stats.iter().map(|(level, &(sum, n))| (level.clone(), sum / n as f64)).collect();
        let mut sorted: Vec<(f64, String)> = means.iter().map(|(l, &m)| (m, l.clone())).collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        sorted.dedup_by(|later, earlier| later.0 == earlier.0);
        Self { means, global_mean, sorted }
    }

    pub fn encode(&self, level: &str) -> f64 {
        self.means.get(level).copied().unwrap_or(self.global_mean)
    }

    /// Level whose mean is nearest to `v`; ties go to the lower mean. Distances
    /// within [`TIE_EPS`] (relative) of each other count as ties.
    pub fn nearest(&self, v: f64) -> (&str, f64) {
        let t = &self.sorted;
        let i = t.partition_point(|(m, _)| *m < v);
        let pick = if i == 0 {
            0
        } else if i == t.len() {
            t.len() - 1
        } else if (t[i].0 - v) < (v - t[i - 1].0) - TIE_EPS * v.abs().max(1.0) {
            i
        } else {
            i - 1
        };
        (&t[pick].1, t[pick].0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TargetColumn {
    Continuous,
    Categorical(LevelTable),
}

/// Fitted target encoder: per-column level tables plus the standardization
/// computed on the out-of-fold training matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetEncoder {
    pub columns: Vec<TargetColumn>,
    pub standardizer: Standardizer,
    pub k_folds: usize,
}

/// Seeded permutation cut into `k` contiguous blocks; returns the fold of each row.
pub fn assign_folds(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut crate::rng_stream(seed, 0x7e));
    let mut folds = vec![0; n];
    for (pos, &row) in perm.iter().enumerate() {
        folds[row] = pos * k / n;
    }
    folds
}

/// Out-of-fold target encoding followed by standardization.
///
/// Each training row's level is replaced by the target mean over the other
/// `k - 1` folds (falling back to those folds' overall mean when the level is
/// absent there). The returned encoder stores full-data means for new rows.
pub fn fit_transform_te(
    data: &Dataset,
    schema: &DatasetSchema,
    k_folds: usize,
    seed: u64,
) -> Result<(Tensor, TargetEncoder), EncodingError> {
    if k_folds < 2 {
        return Err(EncodingError::Folds(format!("need at least 2 folds, got {k_folds}")));
    }
    if data.len() < k_folds {
        return Err(if data.is_empty() {
            EncodingError::Empty
        } else {
            EncodingError::Folds(format!("{} rows cannot fill {k_folds} folds", data.len()))
        });
    }
    let folds = assign_folds(data.len(), k_folds, seed);
    fit_transform_te_with_folds(data, schema, &folds, k_folds)
}

/// [`fit_transform_te`] with an explicit fold per row.
pub fn fit_transform_te_with_folds(
    data: &Dataset,
    schema: &DatasetSchema,
    folds: &[usize],
    k_folds: usize,
) -> Result<(Tensor, TargetEncoder), EncodingError> {
    let n = data.len();
    if n == 0 {
        return Err(EncodingError::Empty);
    }
    if folds.len() != n || folds.iter().any(|&f| f >= k_folds) {
        return Err(EncodingError::Folds("fold assignment does not match the data".into()));
    }
    let k = schema.len();
    let mut matrix = Tensor::zeros(n, k);
    let mut columns = Vec::with_capacity(k);

    let y: Vec<f64> = data.labels.iter().map(|&v| v as f64).collect();
    let total: f64 = y.iter().sum();
    let mut fold_sum = vec![0.0; k_folds];
    let mut fold_n = vec![0usize; k_folds];
    for (i, &f) in folds.iter().enumerate() {
        fold_sum[f] += y[i];
        fold_n[f] += 1;
    }

    for (j, spec) in schema.columns.iter().enumerate() {
        match spec.kind {
            ColumnKind::Continuous => {
                for (i, row) in data.rows.iter().enumerate() {
                    matrix.set(i, j, cell_num(row, j, &spec.name, i)?);
                }
                columns.push(TargetColumn::Continuous);
            }
            ColumnKind::Categorical => {
                // (sum, count) per level overall and per (fold, level)
                let mut overall: BTreeMap<String, (f64, usize)> = BTreeMap::new();
                let mut per_fold: Vec<BTreeMap<&str, (f64, usize)>> = vec![BTreeMap::new(); k_folds];
                for (i, row) in data.rows.iter().enumerate() {
                    let level = cell_cat(row, j, &spec.name, i)?;
                    let e = overall.entry(level.to_string()).or_default();
                    e.0 += y[i];
                    e.1 += 1;
                    let e = per_fold[folds[i]].entry(level).or_default();
                    e.0 += y[i];
                    e.1 += 1;
                }
                for (i, row) in data.rows.iter().enumerate() {
                    let level = cell_cat(row, j, &spec.name, i)?;
                    let f = folds[i];
                    let (all_s, all_n) = overall[level];
                    let (in_s, in_n) = per_fold[f][level];
                    let v = if all_n > in_n {
                        (all_s - in_s) / (all_n - in_n) as f64
                    } else {
                        (total - fold_sum[f]) / (n - fold_n[f]) as f64
                    };
                    matrix.set(i, j, v);
                }
                columns.push(TargetColumn::Categorical(LevelTable::from_stats(&overall, total / n as f64)));
            }
        }
    }

    let standardizer = Standardizer::fit(&matrix, schema)?;
    standardizer.apply_in_place(&mut matrix);
    Ok((matrix, TargetEncoder { columns, standardizer, k_folds }))
}

pub(super) fn cell_num(row: &[Value], j: usize, name: &str, i: usize) -> Result<f64, EncodingError> {
    row.get(j).and_then(Value::as_num).ok_or_else(|| cell_error(j, name, i, "expected a number"))
}

pub(super) fn cell_cat<'r>(row: &'r [Value], j: usize, name: &str, i: usize) -> Result<&'r str, EncodingError> {
    row.get(j).and_then(Value::as_cat).ok_or_else(|| cell_error(j, name, i, "expected a level"))
}

fn cell_error(j: usize, name: &str, i: usize, detail: &str) -> EncodingError {
    let column = if name.is_empty() { format!("#{j}") } else { name.to_string() };
    EncodingError::Cell { row: i, column, detail: detail.into() }
}

impl TargetEncoder {
    pub fn width(&self) -> usize {
        self.columns.len()
    }

    /// Full-data means per level (global mean for unseen levels), then standardize.
    pub fn transform(&self, rows: &[Vec<Value>]) -> Result<Tensor, EncodingError> {
        let k = self.width();
        let mut out = Tensor::zeros(rows.len(), k);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(EncodingError::Width { expected: k, found: row.len() });
            }
            for (j, col) in self.columns.iter().enumerate() {
                let v = match col {
                    TargetColumn::Continuous => cell_num(row, j, "", i)?,
                    TargetColumn::Categorical(t) => t.encode(cell_cat(row, j, "", i)?),
                };
                out.set(i, j, v);
            }
        }
        self.standardizer.apply_in_place(&mut out);
        Ok(out)
    }

    /// De-standardize, then snap categorical coordinates to the nearest level.
    pub fn inverse(&self, encoded: &Tensor) -> Result<Vec<Vec<DecodedCell>>, EncodingError> {
        if encoded.cols() != self.width() {
            return Err(EncodingError::Width { expected: self.width(), found: encoded.cols() });
        }
        Ok(encoded
            .row_iter()
            .map(|r| {
                self.columns
                    .iter()
                    .enumerate()
                    .map(|(j, col)| {
                        let v = self.standardizer.invert(j, r[j]);
                        match col {
                            TargetColumn::Continuous => DecodedCell::Continuous(v),
                            TargetColumn::Categorical(t) => {
                                let (level, mean) = t.nearest(v);
                                DecodedCell::Categorical { level: level.to_string(), encoded: mean }
                            }
                        }
                    })
                    .collect()
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cat_schema() -> DatasetSchema {
        DatasetSchema::from_toml_str("target = \"y\"\npositive_label = \"1\"\ncategorical = [\"c\"]\ncontinuous = [\"x\"]\n")
            .unwrap()
    }

    fn row(level: &str, x: f64) -> Vec<Value> {
        vec![Value::Cat(level.into()), Value::Num(x)]
    }

    fn table(pairs: &[(&str, f64)]) -> LevelTable {
        let stats = pairs.iter().map(|(l, m)| (l.to_string(), (*m, 1))).collect();
        LevelTable::from_stats(&stats, 0.5)
    }

    /// Naive out-of-fold oracle for one categorical column, no standardization.
    fn oof_oracle(levels: &[&str], y: &[f64], folds: &[usize]) -> Vec<f64> {
        (0..levels.len())
            .map(|i| {
                let others: Vec<usize> = (0..levels.len()).filter(|&r| folds[r] != folds[i]).collect();
                let same: Vec<f64> = others.iter().filter(|&&r| levels[r] == levels[i]).map(|&r| y[r]).collect();
                if same.is_empty() {
                    others.iter().map(|&r| y[r]).sum::<f64>() / others.len() as f64
                } else {
                    same.iter().sum::<f64>() / same.len() as f64
                }
            })
            .collect()
    }

    #[test]
    fn hand_fixture_out_of_fold_values() {
        // rows (A,1) (A,0) (B,1) (B,1); fold 0 = rows 0 and 2, fold 1 = rows 1 and 3.
        // Row 0: other fold has A only in row 1 (y=0) -> 0.  Row 1: A in row 0 -> 1.
        // Rows 2, 3: B in the other fold has y=1 -> 1.
        let data = Dataset {
            rows: vec![row("A", 1.0), row("A", 2.0), row("B", 3.0), row("B", 4.0)],
            labels: vec![1, 0, 1, 1],
        };
        let folds = [0, 1, 0, 1];
        let (m, enc) = fit_transform_te_with_folds(&data, &cat_schema(), &folds, 2).unwrap();
        let raw: Vec<f64> = (0..4).map(|i| enc.standardizer.invert(0, m.get(i, 0))).collect();
        let expect = [0.0, 1.0, 1.0, 1.0];
        for (a, b) in raw.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{raw:?}");
        }
        let oracle = oof_oracle(&["A", "A", "B", "B"], &[1.0, 0.0, 1.0, 1.0], &folds);
        for (a, b) in raw.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12, "{raw:?} vs {oracle:?}");
        }
        let TargetColumn::Categorical(t) = &enc.columns[0] else { panic!() };
        assert_eq!(t.means["A"], 0.5);
        assert_eq!(t.means["B"], 1.0);
        assert_eq!(t.global_mean, 0.75);
        // standardization of the OOF column: mean 0.75, population std sqrt(0.1875)
        assert!((enc.standardizer.mean[0] - 0.75).abs() < 1e-15);
        assert!((enc.standardizer.std[0] - 0.1875f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn absent_level_falls_back_to_other_folds_mean() {
        // C only appears in fold 0, so its OOF value is the mean of fold 1's targets.
        let data = Dataset {
            rows: vec![row("C", 0.0), row("A", 1.0), row("A", 2.0), row("B", 3.0)],
            labels: vec![1, 0, 1, 1],
        };
        let folds = [0, 0, 1, 1];
        let (m, enc) = fit_transform_te_with_folds(&data, &cat_schema(), &folds, 2).unwrap();
        let v = enc.standardizer.invert(0, m.get(0, 0));
        assert!((v - 1.0).abs() < 1e-12);
        let oracle = oof_oracle(&["C", "A", "A", "B"], &[1.0, 0.0, 1.0, 1.0], &folds);
        for i in 0..4 {
            assert!((enc.standardizer.invert(0, m.get(i, 0)) - oracle[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_target_level_encodes_to_one() {
        let data = Dataset {
            rows: (0..20).map(|i| row(if i % 2 == 0 { "A" } else { "B" }, i as f64)).collect(),
            labels: (0..20).map(|i| u8::from(i % 2 == 0 || i % 3 == 0)).collect(),
        };
        let (m, enc) = fit_transform_te(&data, &cat_schema(), 4, 1).unwrap();
        for i in (0..20).step_by(2) {
            assert!((enc.standardizer.invert(0, m.get(i, 0)) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn transform_uses_full_means_and_fallback() {
        let data = Dataset {
            rows: vec![row("A", 1.0), row("A", 2.0), row("B", 3.0), row("B", 4.0)],
            labels: vec![1, 0, 1, 1],
        };
        let (_, enc) = fit_transform_te_with_folds(&data, &cat_schema(), &[0, 1, 0, 1], 2).unwrap();
        let t = enc.transform(&[row("B", 0.0), row("Z", 0.0)]).unwrap();
        let (mu, sd) = (enc.standardizer.mean[0], enc.standardizer.std[0]);
        assert!((t.get(0, 0) - (1.0 - mu) / sd).abs() < 1e-12);
        assert!((t.get(1, 0) - (0.75 - mu) / sd).abs() < 1e-12);
    }

    #[test]
    fn transform_matches_fit_when_levels_are_pure() {
        // One level per target value: OOF means equal full means.
        let data = Dataset {
            rows: (0..30).map(|i| row(if i % 3 == 0 { "P" } else { "N" }, i as f64)).collect(),
            labels: (0..30).map(|i| u8::from(i % 3 == 0)).collect(),
        };
        let (fit, enc) = fit_transform_te(&data, &cat_schema(), 5, 9).unwrap();
        let again = enc.transform(&data.rows).unwrap();
        assert!(fit.max_abs_diff(&again) < 1e-12);
    }

    #[test]
    fn nearest_level_and_ties() {
        let t = table(&[("A", 0.2), ("B", 0.6)]);
        assert_eq!(t.nearest(0.35).0, "A");
        assert_eq!(t.nearest(0.4).0, "A");
        assert_eq!(t.nearest(0.41).0, "B");
        assert_eq!(t.nearest(-5.0).0, "A");
        assert_eq!(t.nearest(5.0).0, "B");
    }

    #[test]
    fn duplicate_means_keep_smallest_token() {
        let t = table(&[("beta", 0.5), ("alpha", 0.5), ("gamma", 0.9)]);
        assert_eq!(t.sorted.len(), 2);
        assert_eq!(t.nearest(0.5).0, "alpha");
    }

    #[test]
    fn rejects_bad_fold_counts() {
        let data = Dataset { rows: vec![row("A", 1.0)], labels: vec![1] };
        assert!(matches!(fit_transform_te(&data, &cat_schema(), 1, 0), Err(EncodingError::Folds(_))));
        let empty = Dataset::default();
        assert!(matches!(fit_transform_te(&empty, &cat_schema(), 2, 0), Err(EncodingError::Empty)));
    }

    #[test]
    fn folds_are_balanced_blocks() {
        let f = assign_folds(103, 10, 4);
        let mut counts = [0usize; 10];
        for &x in &f {
            counts[x] += 1;
        }
        assert!(counts.iter().all(|&c| c == 10 || c == 11), "{counts:?}");
        assert_eq!(f, assign_folds(103, 10, 4));
    }
}

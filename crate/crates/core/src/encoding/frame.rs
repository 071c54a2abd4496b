use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{ColumnKind, DatasetSchema, EncodingError};

/// One raw cell: a categorical level or a real number.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Num(f64),
    Cat(String),
}

impl Value {
    pub fn as_num(&self) -> Option<f64> {
        match self {
            Value::Num(x) => Some(*x),
            Value::Cat(_) => None,
        }
    }

    pub fn as_cat(&self) -> Option<&str> {
        match self {
            Value::Cat(s) => Some(s),
            Value::Num(_) => None,
        }
    }
}

impl std::fmt::Display for Value {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Value::Num(x) => write!(f, "{x}"),
            Value::Cat(s) => f.write_str(s),
        }
    }
}

pub type RawRow = Vec<Value>;

/// Raw feature rows in schema order plus 0/1 labels.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub rows: Vec<RawRow>,
    pub labels: Vec<u8>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn read_csv(path: &Path, schema: &DatasetSchema) -> Result<Self, EncodingError> {
        let file = std::fs::File::open(path).map_err(|e| EncodingError::Csv(format!("{}: {e}", path.display())))?;
        Self::from_csv_reader(file, schema)
    }

    /// Header row required; columns not named by the schema are ignored.
    pub fn from_csv_reader<R: Read>(reader: R, schema: &DatasetSchema) -> Result<Self, EncodingError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| EncodingError::Csv(e.to_string()))?.clone();
        let find = |name: &str| {
            headers.iter().position(|h| h == name).ok_or_else(|| EncodingError::MissingColumn(name.to_string()))
        };
        let positions: Vec<usize> = schema.names().map(find).collect::<Result<_, _>>()?;
        let target = find(&schema.target)?;

        let mut data = Dataset::default();
        for (i, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| EncodingError::Csv(e.to_string()))?;
            let mut row = Vec::with_capacity(positions.len());
            for (col, &pos) in schema.columns.iter().zip(&positions) {
                let cell = record.get(pos).unwrap_or("");
                row.push(match col.kind {
                    ColumnKind::Categorical => Value::Cat(cell.to_string()),
                    ColumnKind::Continuous => {
                        let x: f64 = cell.parse().map_err(|_| EncodingError::Cell {
                            row: i + 1,
                            column: col.name.clone(),
                            detail: format!("{cell:?} is not a number"),
                        })?;
                        if !x.is_finite() {
                            return Err(EncodingError::Cell { row: i + 1, column: col.name.clone(), detail: "non-finite".into() });
                        }
                        Value::Num(x)
                    }
                });
            }
            let label = record.get(target).unwrap_or("");
            data.labels.push(u8::from(label == schema.positive_label));
            data.rows.push(row);
        }
        Ok(data)
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Seeded shuffle, then the first `train_fraction` of rows for training.
    pub fn split(&self, train_fraction: f64, seed: u64) -> (Dataset, Dataset) {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut crate::rng_stream(seed, 0x5e11));
        let n_train = ((self.len() as f64) * train_fraction).round() as usize;
        let (a, b) = idx.split_at(n_train.min(self.len()));
        (self.subset(a), self.subset(b))
    }

    pub fn positive_rate(&self) -> f64 {
        self.labels.iter().map(|&y| y as f64).sum::<f64>() / self.len().max(1) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> DatasetSchema {
        DatasetSchema::from_toml_str(
            "target = \"y\"\npositive_label = \"yes\"\ncategorical = [\"c\"]\ncontinuous = [\"x\"]\n",
        )
        .unwrap()
    }

    #[test]
    fn reads_by_header_and_maps_target() {
        let csv = "x,extra,c,y\n1.5,zz,A,yes\n-2,zz,B,no\n";
        let d = Dataset::from_csv_reader(csv.as_bytes(), &schema()).unwrap();
        assert_eq!(d.rows[0], vec![Value::Cat("A".into()), Value::Num(1.5)]);
        assert_eq!(d.labels, vec![1, 0]);
    }

    #[test]
    fn bad_number_names_row_and_column() {
        let csv = "x,c,y\nabc,A,yes\n";
        let err = Dataset::from_csv_reader(csv.as_bytes(), &schema()).unwrap_err();
        assert!(err.to_string().contains('x'), "{err}");
    }

    #[test]
    fn missing_column_is_reported() {
        let csv = "c,y\nA,yes\n";
        assert!(matches!(Dataset::from_csv_reader(csv.as_bytes(), &schema()), Err(EncodingError::MissingColumn(_))));
    }

    #[test]
    fn split_is_deterministic_and_complete() {
        let d = Dataset {
            rows: (0..50).map(|i| vec![Value::Cat("A".into()), Value::Num(i as f64)]).collect(),
            labels: (0..50).map(|i| (i % 2) as u8).collect(),
        };
        let (a, b) = d.split(0.9, 3);
        let (a2, _) = d.split(0.9, 3);
        assert_eq!(a, a2);
        assert_eq!(a.len(), 45);
        assert_eq!(b.len(), 5);
        let mut all: Vec<f64> = a.rows.iter().chain(&b.rows).map(|r| r[1].as_num().unwrap()).collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, (0..50).map(|i| i as f64).collect::<Vec<_>>());
    }
}

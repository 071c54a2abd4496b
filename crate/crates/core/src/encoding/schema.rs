use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EncodingError, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Categorical,
    Continuous,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    /// Proximity weight, 1.0 unless overridden.
    pub weight: f64,
    pub immutable: bool,
    pub monotonic_increase: bool,
}

/// Feature columns in model order plus the binary target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub columns: Vec<ColumnSpec>,
    pub target: String,
    pub positive_label: String,
}

/// On-disk schema document (TOML).
///
/// ```toml
/// target = "income"
/// positive_label = ">50K"
/// categorical = ["race", "gender"]
/// continuous = ["age"]
/// immutable = ["race", "gender"]
/// monotonic_increase = ["age"]
///
/// [weights]
/// race = 3.0
/// ```
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaFile {
    pub target: String,
    pub positive_label: String,
    #[serde(default)]
    pub categorical: Vec<String>,
    #[serde(default)]
    pub continuous: Vec<String>,
    #[serde(default)]
    pub weights: BTreeMap<String, f64>,
    #[serde(default)]
    pub immutable: Vec<String>,
    #[serde(default)]
    pub monotonic_increase: Vec<String>,
}

impl DatasetSchema {
    /// Builds and validates a schema. Feature order is categorical columns
    /// followed by continuous columns, each in the order given.
    pub fn from_file(file: SchemaFile) -> Result<Self, EncodingError> {
        let bad = |msg: String| EncodingError::Schema(msg);
        let mut seen = BTreeSet::new();
        let mut columns = Vec::new();
        for (names, kind) in [(&file.categorical, ColumnKind::Categorical), (&file.continuous, ColumnKind::Continuous)] {
            for name in names {
                if name == &file.target {
                    return Err(bad(format!("target column {name} listed as a feature")));
                }
                if !seen.insert(name.clone()) {
                    return Err(bad(format!("column {name} listed twice")));
                }
                columns.push(ColumnSpec {
                    name: name.clone(),
                    kind,
                    weight: 1.0,
                    immutable: false,
                    monotonic_increase: false,
                });
            }
        }
        if columns.is_empty() {
            return Err(bad("no feature columns".into()));
        }
        let mut schema = DatasetSchema { columns, target: file.target, positive_label: file.positive_label };
        for (name, &w) in &file.weights {
            if !(w > 0.0 && w.is_finite()) {
                return Err(bad(format!("weight for {name} must be positive, got {w}")));
            }
            let i = schema.index_of(name)?;
            schema.columns[i].weight = w;
        }
        for name in &file.immutable {
            let i = schema.index_of(name)?;
            schema.columns[i].immutable = true;
        }
        for name in &file.monotonic_increase {
            let i = schema.index_of(name)?;
            if schema.columns[i].kind != ColumnKind::Continuous {
                return Err(bad(format!("monotonic constraint on categorical column {name}")));
            }
            schema.columns[i].monotonic_increase = true;
        }
        Ok(schema)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, EncodingError> {
        let file: SchemaFile = toml::from_str(text).map_err(|e| EncodingError::Schema(e.to_string()))?;
        Self::from_file(file)
    }

    pub fn load(path: &Path) -> Result<Self, EncodingError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EncodingError::Schema(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    pub fn index_of(&self, name: &str) -> Result<usize, EncodingError> {
        self.columns
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| EncodingError::UnknownColumn(name.to_string()))
    }

    pub fn count(&self, kind: ColumnKind) -> usize {
        self.columns.iter().filter(|c| c.kind == kind).count()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.columns.iter().map(|c| c.weight).collect()
    }

    pub fn immutable_indices(&self) -> Vec<usize> {
        self.columns.iter().enumerate().filter(|(_, c)| c.immutable).map(|(i, _)| i).collect()
    }

    pub fn monotonic_indices(&self) -> Vec<usize> {
        self.columns.iter().enumerate().filter(|(_, c)| c.monotonic_increase).map(|(i, _)| i).collect()
    }

    /// Orders a name-keyed feature map into a schema row, checking kinds.
    pub fn row_from_map(&self, map: &BTreeMap<String, Value>) -> Result<Vec<Value>, EncodingError> {
        if let Some(unknown) = map.keys().find(|k| self.index_of(k).is_err()) {
            return Err(EncodingError::UnknownColumn(unknown.clone()));
        }
        self.columns
            .iter()
            .map(|c| {
                let v = map.get(&c.name).ok_or_else(|| EncodingError::MissingColumn(c.name.clone()))?;
                match (c.kind, v) {
                    (ColumnKind::Categorical, Value::Cat(_)) => Ok(v.clone()),
                    (ColumnKind::Continuous, Value::Num(x)) if x.is_finite() => Ok(v.clone()),
                    // a numeric-looking level such as "1" should still be accepted
                    (ColumnKind::Categorical, Value::Num(x)) => Ok(Value::Cat(x.to_string())),
                    _ => Err(EncodingError::Cell { row: 0, column: c.name.clone(), detail: format!("expected {:?}", c.kind) }),
                }
            })
            .collect()
    }

    pub fn row_to_map(&self, row: &[Value]) -> BTreeMap<String, Value> {
        self.names().map(str::to_string).zip(row.iter().cloned()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ADULT: &str = r#"
        target = "income"
        positive_label = ">50K"
        categorical = ["race", "gender", "workclass", "education", "marital_status", "occupation"]
        continuous = ["age", "hours_per_week"]
        immutable = ["race", "gender"]
        monotonic_increase = ["age"]
        [weights]
        race = 3.0
    "#;

    #[test]
    fn parses_adult_layout() {
        let s = DatasetSchema::from_toml_str(ADULT).unwrap();
        assert_eq!(s.len(), 8);
        assert_eq!(s.count(ColumnKind::Categorical), 6);
        assert_eq!(s.count(ColumnKind::Continuous), 2);
        assert_eq!(s.immutable_indices(), vec![0, 1]);
        assert_eq!(s.monotonic_indices(), vec![6]);
        assert_eq!(s.weights()[0], 3.0);
        assert_eq!(s.weights()[1], 1.0);
    }

    #[test]
    fn rejects_target_as_feature() {
        let t = "target = \"y\"\npositive_label = \"1\"\ncontinuous = [\"y\"]\n";
        assert!(DatasetSchema::from_toml_str(t).is_err());
    }

    #[test]
    fn rejects_non_positive_weight() {
        let t = "target = \"y\"\npositive_label = \"1\"\ncontinuous = [\"a\"]\n[weights]\na = 0.0\n";
        assert!(DatasetSchema::from_toml_str(t).is_err());
    }

    #[test]
    fn rejects_monotone_categorical() {
        let t = "target = \"y\"\npositive_label = \"1\"\ncategorical = [\"a\"]\nmonotonic_increase = [\"a\"]\n";
        assert!(DatasetSchema::from_toml_str(t).is_err());
    }

    #[test]
    fn row_from_map_checks_names() {
        let s = DatasetSchema::from_toml_str(ADULT).unwrap();
        let mut m = BTreeMap::new();
        m.insert("nope".to_string(), Value::Num(1.0));
        assert!(matches!(s.row_from_map(&m), Err(EncodingError::UnknownColumn(_))));
        m.clear();
        m.insert("age".to_string(), Value::Num(30.0));
        assert!(matches!(s.row_from_map(&m), Err(EncodingError::MissingColumn(_))));
    }
}

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::RunConfig;
use crate::classifier::{Classifier, ClassifierState};
use crate::encoding::{ColumnKind, DatasetSchema, FeatureEncoder, RawRow};
use crate::flow::{FlowModel, FlowState};
use crate::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Self-contained trained model: schema, fitted encoder, classifier and flow
/// (coupling and base-density parameters) plus the config that produced them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub seed: u64,
    pub config: RunConfig,
    pub schema: DatasetSchema,
    pub encoder: FeatureEncoder,
    /// Training `[min, max]` of each continuous feature; `None` for categorical.
    pub ranges: Vec<Option<[f64; 2]>>,
    pub classifier: ClassifierState,
    pub flow: FlowState,
}

/// A loaded checkpoint with live models.
#[derive(Clone, Debug)]
pub struct Model {
    pub config: RunConfig,
    pub schema: DatasetSchema,
    pub encoder: FeatureEncoder,
    pub ranges: Vec<Option<[f64; 2]>>,
    pub classifier: Classifier,
    pub flow: FlowModel,
}

impl Model {
    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            seed: self.config.seed,
            config: self.config.clone(),
            schema: self.schema.clone(),
            encoder: self.encoder.clone(),
            ranges: self.ranges.clone(),
            classifier: self.classifier.state(),
            flow: self.flow.state(),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Version { expected: CHECKPOINT_VERSION, found: ck.version });
        }
        let width = ck.encoder.width();
        if ck.classifier.width != width || ck.flow.width != width {
            return Err(Error::Width { expected: width, found: ck.flow.width.max(ck.classifier.width) });
        }
        Ok(Model {
            config: ck.config.clone(),
            schema: ck.schema.clone(),
            encoder: ck.encoder.clone(),
            ranges: ck.ranges.clone(),
            classifier: Classifier::from_state(&ck.classifier)?,
            flow: FlowModel::from_state(&ck.flow)?,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.checkpoint())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            version: u32,
        }
        let header: Header = serde_json::from_str(text)?;
        if header.version != CHECKPOINT_VERSION {
            return Err(Error::Version { expected: CHECKPOINT_VERSION, found: header.version });
        }
        Self::from_checkpoint(&serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_json()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Training `[min, max]` of every continuous feature.
pub fn feature_ranges(schema: &DatasetSchema, rows: &[RawRow]) -> Vec<Option<[f64; 2]>> {
    (0..schema.len())
        .map(|j| {
            (schema.columns[j].kind == ColumnKind::Continuous).then(|| {
                rows.iter().filter_map(|r| r[j].as_num()).fold([f64::INFINITY, f64::NEG_INFINITY], |[lo, hi], v| [lo.min(v), hi.max(v)])
            })
        })
        .collect()
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

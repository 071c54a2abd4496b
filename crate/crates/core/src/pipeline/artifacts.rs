//! On-disk formats. Everything except `timing.json` is a pure function of the
//! model, inputs and generation config.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::checkpoint::write_text;
use super::GenerationRun;
use crate::autodiff::Tensor;
use crate::cf::{CfSet, GenerationConfig};
use crate::encoding::{DatasetSchema, RawRow};
use crate::metrics::MetricsReport;
use crate::{Error, Result};

pub const ARTIFACT_VERSION: u32 = 1;

pub const CF_CSV: &str = "cfs.csv";
pub const INPUTS_CSV: &str = "inputs.csv";
pub const CF_SETS_JSON: &str = "cf_sets.json";
pub const TIMING_JSON: &str = "timing.json";

/// One explained input and its counterfactual set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    /// Position of the row in the test split.
    pub test_row: usize,
    pub raw: RawRow,
    pub set: CfSet,
}

/// Everything needed to recompute metrics without the models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CfArtifact {
    pub version: u32,
    pub schema: DatasetSchema,
    pub generation: GenerationConfig,
    pub inputs: Vec<InputRecord>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub seconds: f64,
    pub n_inputs: usize,
    pub m: usize,
    /// Seconds per input.
    pub run_time: f64,
}

impl Timing {
    pub fn new(seconds: f64, n_inputs: usize, m: usize) -> Self {
        Timing { seconds, n_inputs, m, run_time: seconds / n_inputs.max(1) as f64 }
    }
}

impl CfArtifact {
    pub fn new(schema: &DatasetSchema, run: &GenerationRun) -> Self {
        let inputs = run
            .sets
            .iter()
            .zip(&run.inputs.rows)
            .zip(&run.inputs.raw)
            .map(|((set, &test_row), raw)| InputRecord { test_row, raw: raw.clone(), set: set.clone() })
            .collect();
        CfArtifact { version: ARTIFACT_VERSION, schema: schema.clone(), generation: run.generation.clone(), inputs }
    }

    /// Encoded inputs, raw inputs and sets.
    pub fn parts(&self) -> Result<(Tensor, Vec<RawRow>, Vec<CfSet>)> {
        if self.inputs.is_empty() {
            return Err(Error::Metric("artifact holds no inputs".into()));
        }
        let encoded = Tensor::from_rows(&self.inputs.iter().map(|r| r.set.input.clone()).collect::<Vec<_>>());
        let raw = self.inputs.iter().map(|r| r.raw.clone()).collect();
        let sets = self.inputs.iter().map(|r| r.set.clone()).collect();
        Ok((encoded, raw, sets))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let artifact: CfArtifact = serde_json::from_str(&text)?;
        if artifact.version != ARTIFACT_VERSION {
            return Err(Error::Version { expected: ARTIFACT_VERSION, found: artifact.version });
        }
        Ok(artifact)
    }

    /// Decoded counterfactuals, one CSV row each: feature columns, the decoded
    /// row's probability and log-likelihood, then the input id.
    pub fn cf_csv(&self) -> Result<String> {
        let mut header: Vec<String> = self.schema.names().map(str::to_string).collect();
        header.extend(["probability", "log_likelihood", "input_id"].map(String::from));
        let mut rows = Vec::new();
        for rec in &self.inputs {
            let d = rec.set.decoded()?;
            for ((row, p), ll) in d.rows.iter().zip(&d.probabilities).zip(&d.log_probs) {
                let mut cells: Vec<String> = row.iter().map(ToString::to_string).collect();
                cells.extend([p.to_string(), ll.to_string(), rec.set.input_id.to_string()]);
                rows.push(cells);
            }
        }
        csv_text(&header, &rows)
    }

    /// The explained inputs: feature columns, probability, input id, test row.
    pub fn inputs_csv(&self) -> Result<String> {
        let mut header: Vec<String> = self.schema.names().map(str::to_string).collect();
        header.extend(["probability", "input_id", "test_row"].map(String::from));
        let rows: Vec<Vec<String>> = self
            .inputs
            .iter()
            .map(|rec| {
                let mut cells: Vec<String> = rec.raw.iter().map(ToString::to_string).collect();
                cells.extend([rec.set.input_probability.to_string(), rec.set.input_id.to_string(), rec.test_row.to_string()]);
                cells
            })
            .collect();
        csv_text(&header, &rows)
    }

    /// Writes `cfs.csv`, `inputs.csv` and `cf_sets.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_text(&dir.join(CF_CSV), &self.cf_csv()?)?;
        write_text(&dir.join(INPUTS_CSV), &self.inputs_csv()?)?;
        write_text(&dir.join(CF_SETS_JSON), &serde_json::to_string(self)?)
    }
}

/// Writes the generation artifacts and `timing.json`.
pub fn write_generation(dir: &Path, schema: &DatasetSchema, run: &GenerationRun) -> Result<()> {
    run.artifact(schema).write(dir)?;
    write_json(&dir.join(TIMING_JSON), &run.timing())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &serde_json::to_string_pretty(value)?)
}

pub fn csv_text(header: &[String], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv buffer: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Config(format!("csv utf-8: {e}")))
}

pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    write_text(path, &csv_text(header, rows)?)
}

/// `metrics.json` plus the one-row `metrics.csv`.
pub fn write_metrics(dir: &Path, report: &MetricsReport) -> Result<()> {
    write_json(&dir.join("metrics.json"), report)?;
    let header: Vec<String> = MetricsReport::CSV_HEADER.iter().map(|s| s.to_string()).collect();
    write_csv(&dir.join("metrics.csv"), &header, &[report.csv_row()])
}

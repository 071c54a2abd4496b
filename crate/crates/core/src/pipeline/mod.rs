//! Experiment drivers: data preparation, training, checkpointing, artifact
//! files and the evaluation studies (sweeps, ablation, constraints, encodings).

pub mod api;
mod artifacts;
mod checkpoint;
mod config;

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use artifacts::{
    csv_text, write_csv, write_generation, write_json, write_metrics, CfArtifact, InputRecord, Timing, ARTIFACT_VERSION,
    CF_CSV, CF_SETS_JSON, INPUTS_CSV, TIMING_JSON,
};
pub use checkpoint::{feature_ranges, Checkpoint, Model, CHECKPOINT_VERSION};
pub use config::{ConstraintConfig, Paths, RunConfig};

use crate::autodiff::Tensor;
use crate::cf::{generate_cfs_with_ids, train_fastdcflow, CfSet, GenerationConfig, LossTerms, LossWeights, TrainTrace};
use crate::classifier::{accuracy, train_classifier, Classifier};
use crate::encoding::{Dataset, DatasetSchema, EncoderKind, FeatureEncoder, RawRow};
use crate::flow::FlowModel;
use crate::metrics::{self, MetricsReport, Stat};
use crate::parallel::Execution;
use crate::{Error, Result};

pub fn load_schema(path: &Path) -> Result<DatasetSchema> {
    Ok(DatasetSchema::load(path)?)
}

pub fn load_data(path: &Path, schema: &DatasetSchema) -> Result<Dataset> {
    Ok(Dataset::read_csv(path, schema)?)
}

/// Rows of the split that the classifier scores below `threshold`, in test
/// order, at most `n`.
pub fn select_test_inputs(probabilities: &[f64], threshold: f64, n: usize) -> Result<Vec<usize>> {
    let picked: Vec<usize> = (0..probabilities.len()).filter(|&i| probabilities[i] < threshold).take(n).collect();
    if picked.is_empty() {
        return Err(Error::NoTestInputs { threshold });
    }
    Ok(picked)
}

/// Split, fitted encoder and trained classifier shared by every flow variant
/// of one experiment.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub config: RunConfig,
    pub schema: DatasetSchema,
    pub encoder: FeatureEncoder,
    pub train: Dataset,
    pub test: Dataset,
    pub x_train: Tensor,
    pub x_test: Tensor,
    pub classifier: Classifier,
    pub classifier_trace: Vec<f64>,
    /// Classifier probabilities on the test split.
    pub test_probabilities: Vec<f64>,
    pub test_accuracy: f64,
}

impl Experiment {
    pub fn new(config: &RunConfig, schema: &DatasetSchema, data: &Dataset) -> Result<Self> {
        config.validate()?;
        let (train, test) = data.split(config.split, config.seed);
        let (x_train, encoder) = FeatureEncoder::fit(config.encoder, &train, schema, config.k_folds, config.seed)?;
        let x_test = encoder.transform(&test.rows)?;
        let (classifier, classifier_trace) = train_classifier(&x_train, &train.labels, &config.classifier)?;
        let test_probabilities = classifier.predict(&x_test)?;
        let test_accuracy = accuracy(&test_probabilities, &test.labels);
        Ok(Experiment {
            config: config.clone(),
            schema: schema.clone(),
            encoder,
            train,
            test,
            x_train,
            x_test,
            classifier,
            classifier_trace,
            test_probabilities,
            test_accuracy,
        })
    }

    /// Loss weights implied by the experiment config.
    pub fn loss_weights(&self) -> LossWeights {
        self.config.loss_weights(&self.schema, &self.encoder)
    }

    pub fn train_flow(&self, weights: &LossWeights) -> Result<(FlowModel, TrainTrace)> {
        train_fastdcflow(&self.x_train, &self.classifier, &self.config.flow, weights, &self.config.train)
    }

    pub fn model(&self, flow: FlowModel) -> Model {
        Model {
            config: self.config.clone(),
            schema: self.schema.clone(),
            encoder: self.encoder.clone(),
            ranges: checkpoint::feature_ranges(&self.schema, &self.train.rows),
            classifier: self.classifier.clone(),
            flow,
        }
    }

    pub fn test_inputs(&self) -> Result<TestInputs> {
        let picked = select_test_inputs(&self.test_probabilities, self.config.threshold, self.config.n_tes)?;
        Ok(TestInputs {
            rows: picked.clone(),
            raw: picked.iter().map(|&i| self.test.rows[i].clone()).collect(),
            encoded: self.x_test.select_rows(&picked),
        })
    }
}

/// The explained test inputs: positions in the test split, raw rows, encoded rows.
#[derive(Clone, Debug, PartialEq)]
pub struct TestInputs {
    pub rows: Vec<usize>,
    pub raw: Vec<RawRow>,
    pub encoded: Tensor,
}

impl TestInputs {
    /// Re-derives the test split of `data` exactly as training did and selects
    /// the qualifying inputs.
    pub fn for_model(model: &Model, data: &Dataset) -> Result<Self> {
        let (_, test) = data.split(model.config.split, model.config.seed);
        let x_test = model.encoder.transform(&test.rows)?;
        let probs = model.classifier.predict(&x_test)?;
        let picked = select_test_inputs(&probs, model.config.threshold, model.config.n_tes)?;
        Ok(TestInputs {
            raw: picked.iter().map(|&i| test.rows[i].clone()).collect(),
            encoded: x_test.select_rows(&picked),
            rows: picked,
        })
    }
}

/// Counterfactual sets for every selected input plus wall-clock generation time.
#[derive(Clone, Debug)]
pub struct GenerationRun {
    pub generation: GenerationConfig,
    pub inputs: TestInputs,
    pub sets: Vec<CfSet>,
    pub seconds: f64,
}

impl GenerationRun {
    pub fn artifact(&self, schema: &DatasetSchema) -> CfArtifact {
        CfArtifact::new(schema, self)
    }

    pub fn timing(&self) -> Timing {
        Timing::new(self.seconds, self.sets.len(), self.generation.m)
    }
}

/// Generates counterfactuals for `inputs`. The timed region covers encoding
/// into latent space, perturbation, inversion, decoding and scoring.
pub fn generate(model: &Model, inputs: &TestInputs, generation: &GenerationConfig, exec: Execution) -> Result<GenerationRun> {
    let ids: Vec<usize> = (0..inputs.rows.len()).collect();
    let start = Instant::now();
    let sets = generate_cfs_with_ids(
        &model.flow,
        &model.classifier,
        Some(&model.encoder),
        &inputs.encoded,
        &ids,
        generation,
        exec,
    )?;
    let seconds = start.elapsed().as_secs_f64();
    Ok(GenerationRun { generation: generation.clone(), inputs: inputs.clone(), sets, seconds })
}

/// All metrics over a set of counterfactual sets. FA and MA are reported when
/// the schema declares immutable or monotone features.
pub fn evaluate(
    schema: &DatasetSchema,
    inputs: &Tensor,
    raw_inputs: &[RawRow],
    sets: &[CfSet],
    seconds: Option<f64>,
    exec: Execution,
) -> Result<MetricsReport> {
    let encoded: Vec<Tensor> = sets.iter().map(|s| s.encoded.clone()).collect();
    let input_probs: Vec<f64> = sets.iter().map(|s| s.input_probability).collect();
    let cf_probs: Vec<Vec<f64>> = sets.iter().map(|s| s.probabilities.clone()).collect();
    let decoded: Result<Vec<Vec<RawRow>>> = sets.iter().map(|s| Ok(s.decoded()?.rows.clone())).collect();
    let (immutable, monotone) = (schema.immutable_indices(), schema.monotonic_indices());
    let (fix, mono) = if immutable.is_empty() && monotone.is_empty() {
        (None, None)
    } else {
        let decoded = decoded?;
        let fa = (!immutable.is_empty()).then(|| metrics::fix_accuracy(raw_inputs, &decoded, &immutable)).transpose()?;
        let ma = (!monotone.is_empty())
            .then(|| metrics::monotonicity_accuracy(raw_inputs, &decoded, &monotone))
            .transpose()?;
        (fa, ma)
    };
    Ok(MetricsReport {
        n_inputs: sets.len(),
        m: sets.first().map_or(0, CfSet::m),
        inner_diversity: metrics::inner_diversity(&encoded, exec)?,
        outer_diversity: metrics::outer_diversity(&encoded, exec)?,
        proximity: metrics::proximity(inputs, &encoded, exec)?,
        validity: metrics::validity(&input_probs, &cf_probs)?,
        run_time: seconds.map(|s| metrics::run_time(s, sets.len())).transpose()?,
        fix_accuracy: fix,
        monotonicity_accuracy: mono,
        encoding: metrics::encoding_report(&input_probs, &cf_probs)?,
    })
}

pub fn evaluate_run(schema: &DatasetSchema, run: &GenerationRun, exec: Execution) -> Result<MetricsReport> {
    evaluate(schema, &run.inputs.encoded, &run.inputs.raw, &run.sets, Some(run.seconds), exec)
}

/// Recomputes metrics from a stored artifact.
pub fn evaluate_artifact(artifact: &CfArtifact, timing: Option<&Timing>, exec: Execution) -> Result<MetricsReport> {
    let (inputs, raw, sets) = artifact.parts()?;
    evaluate(&artifact.schema, &inputs, &raw, &sets, timing.map(|t| t.seconds), exec)
}

/// Result of `train`: the model and both loss traces.
#[derive(Clone, Debug)]
pub struct Trained {
    pub model: Model,
    pub classifier_trace: Vec<f64>,
    pub flow_trace: TrainTrace,
    pub test_accuracy: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceFile {
    pub classifier_loss: Vec<f64>,
    pub classifier_test_accuracy: f64,
    pub flow: TrainTrace,
}

pub fn train(config: &RunConfig, schema: &DatasetSchema, data: &Dataset) -> Result<Trained> {
    let exp = Experiment::new(config, schema, data)?;
    let (flow, flow_trace) = exp.train_flow(&exp.loss_weights())?;
    Ok(Trained {
        classifier_trace: exp.classifier_trace.clone(),
        test_accuracy: exp.test_accuracy,
        model: exp.model(flow),
        flow_trace,
    })
}

impl Trained {
    pub fn trace_file(&self) -> TraceFile {
        TraceFile {
            classifier_loss: self.classifier_trace.clone(),
            classifier_test_accuracy: self.test_accuracy,
            flow: self.flow_trace.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Temperature,
    M,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "temperature" | "t" => Ok(SweepAxis::Temperature),
            "m" | "M" => Ok(SweepAxis::M),
            other => Err(Error::Config(format!("unknown sweep axis {other:?}, expected temperature or m"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub seconds: f64,
    pub seconds_per_cf: f64,
    pub report: MetricsReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn csv_header() -> Vec<String> {
        let mut h = vec!["axis".to_string(), "value".into(), "seconds".into(), "seconds_per_cf".into()];
        h.extend(MetricsReport::CSV_HEADER.iter().map(|s| s.to_string()));
        h
    }

    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        let axis = serde_json::to_value(self.axis).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
        self.rows
            .iter()
            .map(|r| {
                let mut row = vec![axis.clone(), r.value.to_string(), r.seconds.to_string(), r.seconds_per_cf.to_string()];
                row.extend(r.report.csv_row());
                row
            })
            .collect()
    }
}

/// Generation and evaluation repeated for each value of one axis, all other
/// settings fixed.
pub fn sweep(
    model: &Model,
    inputs: &TestInputs,
    base: &GenerationConfig,
    axis: SweepAxis,
    values: &[f64],
    exec: Execution,
) -> Result<SweepReport> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let mut rows = Vec::with_capacity(values.len());
    for &value in values {
        let mut generation = base.clone();
        match axis {
            SweepAxis::Temperature => generation.temperature = value,
            SweepAxis::M => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(Error::Config(format!("M must be a positive integer, got {value}")));
                }
                generation.m = value as usize;
            }
        }
        let run = generate(model, inputs, &generation, exec)?;
        let report = evaluate_run(&model.schema, &run, exec)?;
        let n_cf = (run.sets.len() * generation.m) as f64;
        rows.push(SweepRow { value, seconds: run.seconds, seconds_per_cf: run.seconds / n_cf, report });
    }
    Ok(SweepReport { axis, rows })
}

/// A named loss-term subset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "nll")]
    Nll,
    #[serde(rename = "nll+y")]
    NllValidity,
    #[serde(rename = "full")]
    Full,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Nll, Variant::NllValidity, Variant::Full];

    pub fn terms(self) -> LossTerms {
        match self {
            Variant::Nll => LossTerms { validity: false, proximity: false },
            Variant::NllValidity => LossTerms { validity: true, proximity: false },
            Variant::Full => LossTerms { validity: true, proximity: true },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Nll => "nll",
            Variant::NllValidity => "nll+y",
            Variant::Full => "full",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub name: String,
    pub report: MetricsReport,
}

/// Rows of a multi-model study sharing one split, classifier and test selection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub rows: Vec<StudyRow>,
}

impl StudyReport {
    pub fn get(&self, name: &str) -> Option<&MetricsReport> {
        self.rows.iter().find(|r| r.name == name).map(|r| &r.report)
    }

    pub fn csv_header() -> Vec<String> {
        let mut h = vec!["name".to_string()];
        h.extend(MetricsReport::CSV_HEADER.iter().map(|s| s.to_string()));
        h
    }

    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                let mut row = vec![r.name.clone()];
                row.extend(r.report.csv_row());
                row
            })
            .collect()
    }
}

/// Trains and evaluates one flow with the given weights on the experiment's inputs.
pub fn study_row(exp: &Experiment, name: &str, weights: &LossWeights, exec: Execution) -> Result<(StudyRow, Model)> {
    let (flow, _) = exp.train_flow(weights)?;
    let model = exp.model(flow);
    let run = generate(&model, &exp.test_inputs()?, &exp.config.generation, exec)?;
    let report = evaluate_run(&exp.schema, &run, exec)?;
    Ok((StudyRow { name: name.to_string(), report }, model))
}

/// One flow per loss-term subset on a shared classifier.
pub fn ablate(exp: &Experiment, exec: Execution) -> Result<StudyReport> {
    let base = exp.loss_weights();
    let rows = Variant::ALL
        .iter()
        .map(|v| {
            let weights = LossWeights { terms: v.terms(), ..base.clone() };
            study_row(exp, v.name(), &weights, exec).map(|(row, _)| row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StudyReport { rows })
}

/// Weights for the unconstrained and constrained runs of the constraint study.
pub fn constraint_weights(exp: &Experiment) -> (LossWeights, LossWeights) {
    let mut off = exp.config.clone();
    off.constraints.enabled = false;
    let mut on = exp.config.clone();
    on.constraints.enabled = true;
    (off.loss_weights(&exp.schema, &exp.encoder), on.loss_weights(&exp.schema, &exp.encoder))
}

/// Unconstrained versus constrained flows on one classifier and one test selection.
pub fn constraint_study(exp: &Experiment, exec: Execution) -> Result<StudyReport> {
    let (off, on) = constraint_weights(exp);
    let (a, _) = study_row(exp, "unconstrained", &off, exec)?;
    let (b, _) = study_row(exp, "constrained", &on, exec)?;
    Ok(StudyReport { rows: vec![a, b] })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodingRow {
    pub encoder: EncoderKind,
    pub seed: u64,
    pub width: usize,
    pub classifier_accuracy: f64,
    pub report: MetricsReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodingComparison {
    pub rows: Vec<EncodingRow>,
    /// Welch t statistic and degrees of freedom of TE versus OHE classifier
    /// accuracies; needs at least two seeds.
    pub accuracy_t: Option<(f64, f64)>,
}

impl EncodingComparison {
    pub fn by_kind(&self, kind: EncoderKind) -> Vec<&EncodingRow> {
        self.rows.iter().filter(|r| r.encoder == kind).collect()
    }

    pub fn std_cf_probability(&self, kind: EncoderKind) -> Stat {
        Stat::of(&self.by_kind(kind).iter().map(|r| r.report.encoding.std_cf_probability).collect::<Vec<_>>())
    }
}

/// Evaluates one encoder kind: a fresh experiment and flow with the config's weights.
pub fn encoding_row(config: &RunConfig, kind: EncoderKind, schema: &DatasetSchema, data: &Dataset, exec: Execution) -> Result<EncodingRow> {
    let config = RunConfig { encoder: kind, ..config.clone() };
    let exp = Experiment::new(&config, schema, data)?;
    let (row, _) = study_row(&exp, kind_name(kind), &exp.loss_weights(), exec)?;
    Ok(EncodingRow {
        encoder: kind,
        seed: config.seed,
        width: exp.encoder.width(),
        classifier_accuracy: exp.test_accuracy,
        report: row.report,
    })
}

fn kind_name(kind: EncoderKind) -> &'static str {
    match kind {
        EncoderKind::Te => "te",
        EncoderKind::Ohe => "ohe",
    }
}

/// Target versus one-hot encoding over the given seeds.
pub fn compare_encoders(config: &RunConfig, schema: &DatasetSchema, data: &Dataset, seeds: &[u64], exec: Execution) -> Result<EncodingComparison> {
    let mut rows = Vec::new();
    for &seed in seeds {
        let seeded = config.clone().with_seed(seed);
        for kind in [EncoderKind::Te, EncoderKind::Ohe] {
            rows.push(encoding_row(&seeded, kind, schema, data, exec)?);
        }
    }
    Ok(comparison_from_rows(rows))
}

pub fn comparison_from_rows(rows: Vec<EncodingRow>) -> EncodingComparison {
    let acc = |k: EncoderKind| -> Vec<f64> { rows.iter().filter(|r| r.encoder == k).map(|r| r.classifier_accuracy).collect() };
    let accuracy_t = metrics::two_sample_t(&acc(EncoderKind::Te), &acc(EncoderKind::Ohe)).ok();
    EncodingComparison { rows, accuracy_t }
}

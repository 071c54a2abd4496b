use std::path::{Path, PathBuf};
use std::sync::Arc;

use flowcf::pipeline::{
    self, compare_encoders, constraint_study, evaluate_artifact, write_csv, write_generation, write_json, write_metrics,
    CfArtifact, EncodingComparison, Experiment, Model, RunConfig, StudyReport, SweepReport, TestInputs, Timing,
    CF_SETS_JSON, TIMING_JSON,
};
use flowcf::{Error, Result};
use serde::Serialize;

use crate::{Cli, Command, Global};

const DEFAULT_OUT: &str = "out";
const DEFAULT_BIND: &str = "127.0.0.1:8080";
const CHECKPOINT_FILE: &str = "checkpoint.json";

pub fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Train { constrained } => train(g, *constrained),
        Command::Generate => generate(g),
        Command::Evaluate => evaluate(g),
        Command::Sweep { axis, values } => {
            let (model, inputs) = load_model_and_inputs(g)?;
            let base = generation_overrides(g, &model.config).generation;
            let report = pipeline::sweep(&model, &inputs, &base, *axis, values, g.execution())?;
            write_sweep(&out_dir(g), &report)?;
            print_json(&report)
        }
        Command::Ablate => {
            let exp = experiment(g)?;
            let report = pipeline::ablate(&exp, g.execution())?;
            write_study(&out_dir(g), "ablation", &report)?;
            print_json(&report)
        }
        Command::Constraints => {
            let exp = experiment(g)?;
            let report = constraint_study(&exp, g.execution())?;
            write_study(&out_dir(g), "constraints", &report)?;
            print_json(&report)
        }
        Command::Encodings { seeds } => {
            let config = run_config(g)?;
            let (schema, data) = load_dataset(&config)?;
            let report = compare_encoders(&config, &schema, &data, seeds, g.execution())?;
            write_encodings(&out_dir(g), &report)?;
            print_json(&report)
        }
        Command::Serve => {
            let model = Model::load(&checkpoint_path(g))?;
            let bind = g.bind.clone().unwrap_or_else(|| DEFAULT_BIND.to_string());
            crate::service::serve(Arc::new(model), &bind, g.execution())
        }
    }
}

fn out_dir(g: &Global) -> PathBuf {
    g.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn checkpoint_path(g: &Global) -> PathBuf {
    g.checkpoint.clone().unwrap_or_else(|| out_dir(g).join(CHECKPOINT_FILE))
}

/// Config file (or defaults) with command-line overrides applied.
pub fn run_config(g: &Global) -> Result<RunConfig> {
    let mut c = match &g.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = g.seed {
        c = c.with_seed(seed);
    }
    if let Some(e) = g.encoder {
        c.encoder = e;
    }
    if let Some(n) = g.epochs {
        c.classifier.epochs = n;
        c.train.epochs = n;
    }
    if let Some(n) = g.batch_size {
        c.classifier.batch_size = n;
        c.train.batch_size = n;
    }
    if let Some(l) = g.lambda {
        c.weights.lambda = l;
    }
    if let Some(k) = g.kfolds {
        c.k_folds = k;
    }
    c.paths.data = g.data.clone().or(c.paths.data);
    c.paths.schema = g.schema.clone().or(c.paths.schema);
    c.paths.checkpoint = g.checkpoint.clone().or(c.paths.checkpoint);
    c.paths.out = g.out.clone().or(c.paths.out);
    Ok(generation_overrides(g, &c))
}

/// Applies the flags that are meaningful after training.
pub fn generation_overrides(g: &Global, base: &RunConfig) -> RunConfig {
    let mut c = base.clone();
    if let Some(t) = g.temperature {
        c.generation.temperature = t;
    }
    if let Some(m) = g.m {
        c.generation.m = m;
    }
    if let Some(seed) = g.seed {
        c.generation.seed = seed;
    }
    if let Some(n) = g.ntes {
        c.n_tes = n;
    }
    if let Some(t) = g.threshold {
        c.threshold = t;
    }
    c
}

fn load_dataset(config: &RunConfig) -> Result<(flowcf::encoding::DatasetSchema, flowcf::encoding::Dataset)> {
    let schema = pipeline::load_schema(required(&config.paths.schema, "schema")?)?;
    let data = pipeline::load_data(required(&config.paths.data, "data")?, &schema)?;
    Ok((schema, data))
}

fn required<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    pipeline::Paths::require(path, flag)
}

fn experiment(g: &Global) -> Result<Experiment> {
    let config = run_config(g)?;
    let (schema, data) = load_dataset(&config)?;
    Experiment::new(&config, &schema, &data)
}

fn train(g: &Global, constrained: bool) -> Result<()> {
    let mut config = run_config(g)?;
    config.constraints.enabled |= constrained;
    let (schema, data) = load_dataset(&config)?;
    let trained = pipeline::train(&config, &schema, &data)?;
    let path = checkpoint_path(g);
    trained.model.save(&path)?;
    write_json(&out_dir(g).join("traces.json"), &trained.trace_file())?;
    print_json(&serde_json::json!({
        "checkpoint": path,
        "encoded_width": trained.model.encoder.width(),
        "classifier_test_accuracy": trained.test_accuracy,
        "final_flow_loss": trained.flow_trace.total.last(),
    }))
}

/// Model from the checkpoint, with generation flags applied, and its test inputs.
fn load_model_and_inputs(g: &Global) -> Result<(Model, TestInputs)> {
    let mut model = Model::load(&checkpoint_path(g))?;
    model.config = generation_overrides(g, &model.config);
    let data_path = g.data.clone().or(model.config.paths.data.clone());
    let data = pipeline::load_data(required(&data_path, "data")?, &model.schema)?;
    let inputs = TestInputs::for_model(&model, &data)?;
    Ok((model, inputs))
}

fn generate(g: &Global) -> Result<()> {
    let (model, inputs) = load_model_and_inputs(g)?;
    let run = pipeline::generate(&model, &inputs, &model.config.generation, g.execution())?;
    let dir = out_dir(g);
    write_generation(&dir, &model.schema, &run)?;
    print_json(&serde_json::json!({
        "out": dir,
        "n_inputs": run.sets.len(),
        "m": run.generation.m,
        "cf_rows": run.sets.len() * run.generation.m,
        "seconds": run.seconds,
    }))
}

fn evaluate(g: &Global) -> Result<()> {
    let dir = out_dir(g);
    let artifact = CfArtifact::load(&dir.join(CF_SETS_JSON))?;
    let timing_path = dir.join(TIMING_JSON);
    let timing: Option<Timing> = if timing_path.exists() {
        let text = std::fs::read_to_string(&timing_path).map_err(|e| Error::io(&timing_path, e))?;
        Some(serde_json::from_str(&text)?)
    } else {
        None
    };
    let report = evaluate_artifact(&artifact, timing.as_ref(), g.execution())?;
    write_metrics(&dir, &report)?;
    print_json(&report)
}

fn write_sweep(dir: &Path, report: &SweepReport) -> Result<()> {
    write_json(&dir.join("sweep.json"), report)?;
    write_csv(&dir.join("sweep.csv"), &SweepReport::csv_header(), &report.csv_rows())
}

fn write_study(dir: &Path, stem: &str, report: &StudyReport) -> Result<()> {
    write_json(&dir.join(format!("{stem}.json")), report)?;
    write_csv(&dir.join(format!("{stem}.csv")), &StudyReport::csv_header(), &report.csv_rows())
}

fn write_encodings(dir: &Path, report: &EncodingComparison) -> Result<()> {
    write_json(&dir.join("encodings.json"), report)?;
    let mut header: Vec<String> = ["encoder", "seed", "width", "classifier_accuracy"].map(String::from).to_vec();
    header.extend(flowcf::metrics::MetricsReport::CSV_HEADER.iter().map(|s| s.to_string()));
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            let kind = serde_json::to_value(r.encoder).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
            let mut row = vec![kind, r.seed.to_string(), r.width.to_string(), r.classifier_accuracy.to_string()];
            row.extend(r.report.csv_row());
            row
        })
        .collect();
    write_csv(&dir.join("encodings.csv"), &header, &rows)
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

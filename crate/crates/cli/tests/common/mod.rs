#![allow(dead_code)]

use std::path::{Path, PathBuf};

use flowcf::pipeline::{self, Model, RunConfig};

pub fn repo_data() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn schema_path() -> PathBuf {
    repo_data().join("adult.schema.toml")
}

/// The first `rows` records of the Adult fixture written to `dir`.
pub fn adult_subset(dir: &Path, rows: usize) -> PathBuf {
    let text = std::fs::read_to_string(repo_data().join("adult.csv")).unwrap();
    let subset: Vec<&str> = text.lines().take(rows + 1).collect();
    let path = dir.join("adult_small.csv");
    std::fs::write(&path, subset.join("\n") + "\n").unwrap();
    path
}

pub fn quick_config(seed: u64) -> RunConfig {
    let mut c = RunConfig::default().with_seed(seed);
    c.classifier.epochs = 2;
    c.train.epochs = 1;
    c.n_tes = 5;
    c.generation.m = 4;
    c
}

/// A briefly trained model on a 1,500-row subset.
pub fn quick_model(dir: &Path) -> Model {
    let data_path = adult_subset(dir, 1500);
    let schema = pipeline::load_schema(&schema_path()).unwrap();
    let data = pipeline::load_data(&data_path, &schema).unwrap();
    pipeline::train(&quick_config(5), &schema, &data).unwrap().model
}

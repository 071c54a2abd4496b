//! Command-line driver and HTTP service for flowcf.

pub mod commands;
pub mod service;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use flowcf::encoding::EncoderKind;
use flowcf::parallel::Execution;
use flowcf::pipeline::SweepAxis;

#[derive(Debug, Parser)]
#[command(name = "flowcf", version, about = "Counterfactual explanations with a normalizing-flow generator")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand. Unset flags fall back to `--config`,
/// then to the checkpoint's stored config, then to built-in defaults.
#[derive(Debug, Default, Clone, Args)]
pub struct Global {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Dataset CSV with a header row.
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    /// Schema TOML describing feature kinds and constraints.
    #[arg(long, global = true)]
    pub schema: Option<PathBuf>,
    /// Checkpoint JSON to write (train) or read (generate, sweep, serve).
    #[arg(long, global = true)]
    pub checkpoint: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_parser = parse_encoder)]
    pub encoder: Option<EncoderKind>,
    /// Training epochs for both the classifier and the flow [default: 10].
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    /// Mini-batch size for both the classifier and the flow [default: 64].
    #[arg(long, global = true)]
    pub batch_size: Option<usize>,
    /// Weight of the negative log-likelihood term [default: 0.01].
    #[arg(long = "lambda", global = true)]
    pub lambda: Option<f64>,
    /// Latent noise variance at generation [default: 1.0].
    #[arg(long, global = true)]
    pub temperature: Option<f64>,
    /// Counterfactuals per input [default: 100].
    #[arg(long, global = true)]
    pub m: Option<usize>,
    /// Number of test inputs to explain [default: 100].
    #[arg(long, global = true)]
    pub ntes: Option<usize>,
    /// Folds for out-of-fold target encoding [default: 10].
    #[arg(long, global = true)]
    pub kfolds: Option<usize>,
    /// Test inputs qualify below this predicted probability [default: 0.5].
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    /// Service address [default: 127.0.0.1:8080].
    #[arg(long, global = true)]
    pub bind: Option<String>,
    /// Run data-parallel loops on the calling thread.
    #[arg(long, global = true)]
    pub sequential: bool,
}

impl Global {
    pub fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }
}

fn parse_encoder(s: &str) -> Result<EncoderKind, String> {
    s.parse()
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Fit encoder, classifier and flow; write the checkpoint and loss traces.
    Train {
        /// Train with immutable-feature weights and the monotone penalty.
        #[arg(long)]
        constrained: bool,
    },
    /// Generate counterfactuals for the selected test inputs.
    Generate,
    /// Compute metrics from generated artifacts in the output directory.
    Evaluate,
    /// Repeat generation and evaluation over temperature or M.
    Sweep {
        #[arg(long, default_value = "temperature")]
        axis: SweepAxis,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Train and compare the nll, nll+y and full loss variants.
    Ablate,
    /// Train unconstrained and constrained flows and compare them.
    Constraints,
    /// Compare target and one-hot encoding over one or more seeds.
    Encodings {
        #[arg(long, value_delimiter = ',', default_value = "0")]
        seeds: Vec<u64>,
    },
    /// Serve the HTTP API for a checkpoint.
    Serve,
}

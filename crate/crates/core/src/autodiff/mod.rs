//! Reverse-mode differentiation over dense `f64` matrices, plus Adam and a
//! finite-difference gradient checker.
//!
//! A [`Graph`] records every operation as it is evaluated. Parameters live in a
//! [`ParamStore`] owned by each model and are bound into a graph by reference,
//! so evaluation-mode passes over frozen models copy no weights and can run on
//! many threads at once.

mod adam;
mod gradcheck;
mod graph;
mod params;
mod tensor;

pub use adam::AdamState;
pub use gradcheck::{finite_diff_check, finite_diff_check_with, GradCheckOptions, GradCheckReport, ParamCheck};
pub use graph::{logsumexp, sigmoid, Gradients, Graph, Var};
pub use params::{ParamId, ParamRecord, ParamStore, Parameter};
pub use tensor::Tensor;

#[derive(Debug, thiserror::Error)]
pub enum AutodiffError {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },
    #[error("backward needs a scalar output, got {rows}x{cols}")]
    NonScalarOutput { rows: usize, cols: usize },
    #[error("parameter {0} has no gradient")]
    MissingGradient(String),
    #[error("unknown parameter index {0}")]
    UnknownParameter(usize),
    #[error("parameter layout mismatch: {0}")]
    Layout(String),
}

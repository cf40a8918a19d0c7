//! File formats and batch drivers behind the `simulst` binary.
//!
//! * manifest (JSON): the sources to translate,
//! * instance log (JSONL): one scored or failed instance per line,
//! * report (JSON): corpus BLEU and mean latencies,
//! * sweep (CSV): one row of metrics per layer or `f` value.

mod evaluate;
mod log;
mod manifest;
mod model_spec;
mod presets;
mod report;
mod sweep;

use std::io;

use thiserror::Error;

use crate::bleu::BleuError;
use crate::harness::SessionError;
use crate::latency::MetricError;
use crate::model::ModelError;
use crate::types::InvariantViolation;

pub use evaluate::{evaluate, evaluate_instance, EvalSettings, Evaluation};
pub use log::{read_log, write_log, LogEntry, ScoredInstance};
pub use manifest::{Manifest, ManifestEntry, SourceSpec};
pub use model_spec::parse_model_spec;
pub use presets::LanguagePair;
pub use report::{aggregate, render_table, AggregateReport};
pub use sweep::{run_sweep, write_sweep_csv, SweepAxis, SweepRow, SweepSpec, SweepValue};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid manifest: {0}")]
    Manifest(String),
    #[error("line {line}: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("instance log is empty")]
    EmptyLog,
    #[error("instances mix word and character segmentation")]
    MixedSegmentation,
    #[error("invalid model spec `{0}`; expected builtin:diagonal, builtin:scripted:FILE or remote:HOST:PORT")]
    ModelSpec(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Bleu(#[from] BleuError),
    #[error(transparent)]
    Invariant(#[from] InvariantViolation),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("thread pool: {0}")]
    Pool(String),
}

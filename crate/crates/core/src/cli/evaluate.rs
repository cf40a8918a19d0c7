use rayon::prelude::*;

use super::{aggregate, AggregateReport, CliError, LogEntry, Manifest, ScoredInstance};
use crate::harness::{run_session, SessionOptions, SessionResult};
use crate::model::ModelSpec;
use crate::types::PolicyConfig;

#[derive(Debug, Clone)]
pub struct EvalSettings {
    pub config: PolicyConfig,
    pub options: SessionOptions,
    /// Worker threads; instances always come back in manifest order.
    pub jobs: usize,
    /// ATD segment length; defaults to the chunk size.
    pub atd_unit_ms: Option<f64>,
}

impl EvalSettings {
    pub fn new(config: PolicyConfig) -> Self {
        Self {
            config,
            options: SessionOptions::default(),
            jobs: 1,
            atd_unit_ms: None,
        }
    }

    pub fn atd_unit_ms(&self) -> f64 {
        self.atd_unit_ms
            .unwrap_or_else(|| self.config.chunk_ms() as f64)
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub entries: Vec<LogEntry>,
    pub report: AggregateReport,
}

impl Evaluation {
    pub fn failed(&self) -> impl Iterator<Item = &LogEntry> {
        self.entries.iter().filter(|e| e.error().is_some())
    }
}

/// Runs manifest entry `index` on a fresh model.
pub fn evaluate_instance(
    manifest: &Manifest,
    index: usize,
    model: &ModelSpec,
    settings: &EvalSettings,
) -> Result<(SessionResult, ScoredInstance), CliError> {
    let mut m = model.instantiate()?;
    let input = manifest.session_input(index, m.frame_ms())?;
    let result = run_session(m.as_mut(), &input, &settings.config, &settings.options)?;
    let scored = ScoredInstance::new(result.record.clone(), settings.atd_unit_ms(), result.truncated)?;
    Ok((result, scored))
}

pub fn evaluate(
    manifest: &Manifest,
    model: &ModelSpec,
    settings: &EvalSettings,
) -> Result<Evaluation, CliError> {
    let run_one = |index: usize| -> LogEntry {
        match evaluate_instance(manifest, index, model, settings) {
            Ok((_, scored)) => LogEntry::Scored(scored),
            Err(e) => LogEntry::Failed {
                index,
                id: manifest.entries[index].id.clone(),
                error: e.to_string(),
            },
        }
    };
    let n = manifest.entries.len();
    let entries: Vec<LogEntry> = if settings.jobs <= 1 {
        (0..n).map(run_one).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(settings.jobs)
            .build()
            .map_err(|e| CliError::Pool(e.to_string()))?;
        pool.install(|| (0..n).into_par_iter().map(run_one).collect())
    };
    let report = aggregate(&entries)?;
    Ok(Evaluation { entries, report })
}

//! Instance log: one JSON object per line.
//!
//! Scored lines carry `index, id, source_length, prediction, reference,
//! delays, elapsed, segmentation, atd_unit_ms, truncated, metrics`; failed
//! lines carry `index, id, error`. `elapsed` holds the computation-aware
//! delays. All times are milliseconds.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::latency::{self, LatencyReport, MetricError, SourceUnits};
use crate::types::{InstanceRecord, Segmentation};

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredInstance {
    pub record: InstanceRecord,
    /// Length of the audio segments ATD pairs target units with.
    pub atd_unit_ms: f64,
    pub truncated: bool,
    pub metrics: LatencyReport,
}

impl ScoredInstance {
    pub fn new(record: InstanceRecord, atd_unit_ms: f64, truncated: bool) -> Result<Self, MetricError> {
        let metrics = latency::report(&record, Self::units(&record, atd_unit_ms))?;
        Ok(Self {
            record,
            atd_unit_ms,
            truncated,
            metrics,
        })
    }

    fn units(record: &InstanceRecord, atd_unit_ms: f64) -> SourceUnits {
        SourceUnits::segments(record.source_duration_ms(), atd_unit_ms)
    }

    pub fn source_units(&self) -> SourceUnits {
        Self::units(&self.record, self.atd_unit_ms)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LogEntry {
    Scored(ScoredInstance),
    Failed {
        index: usize,
        id: String,
        error: String,
    },
}

impl LogEntry {
    pub fn index(&self) -> usize {
        match self {
            LogEntry::Scored(s) => s.record.index(),
            LogEntry::Failed { index, .. } => *index,
        }
    }

    pub fn id(&self) -> &str {
        match self {
            LogEntry::Scored(s) => s.record.id(),
            LogEntry::Failed { id, .. } => id,
        }
    }

    pub fn error(&self) -> Option<&str> {
        match self {
            LogEntry::Scored(_) => None,
            LogEntry::Failed { error, .. } => Some(error),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LogLine {
    index: usize,
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source_length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    prediction: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reference: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delays: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    elapsed: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    segmentation: Option<Segmentation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    atd_unit_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    truncated: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    metrics: Option<LatencyReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

impl From<&LogEntry> for LogLine {
    fn from(entry: &LogEntry) -> Self {
        match entry {
            LogEntry::Scored(s) => {
                let r = &s.record;
                LogLine {
                    index: r.index(),
                    id: r.id().to_owned(),
                    source_length: Some(r.source_duration_ms()),
                    prediction: Some(r.hypothesis().to_owned()),
                    reference: Some(r.reference().to_owned()),
                    delays: Some(r.delays_ms().to_vec()),
                    elapsed: Some(r.ca_delays_ms().to_vec()),
                    segmentation: Some(r.segmentation()),
                    atd_unit_ms: Some(s.atd_unit_ms),
                    truncated: Some(s.truncated),
                    metrics: Some(s.metrics),
                    error: None,
                }
            }
            LogEntry::Failed { index, id, error } => LogLine {
                index: *index,
                id: id.clone(),
                source_length: None,
                prediction: None,
                reference: None,
                delays: None,
                elapsed: None,
                segmentation: None,
                atd_unit_ms: None,
                truncated: None,
                metrics: None,
                error: Some(error.clone()),
            },
        }
    }
}

fn required<T>(v: Option<T>, name: &str) -> Result<T, String> {
    v.ok_or_else(|| format!("missing field `{name}`"))
}

impl TryFrom<LogLine> for LogEntry {
    type Error = String;

    /// Metrics are recomputed from the logged delays, never trusted.
    fn try_from(l: LogLine) -> Result<Self, Self::Error> {
        if let Some(error) = l.error {
            return Ok(LogEntry::Failed {
                index: l.index,
                id: l.id,
                error,
            });
        }
        let record = InstanceRecord::new(
            l.index,
            l.id,
            required(l.source_length, "source_length")?,
            required(l.prediction, "prediction")?,
            required(l.reference, "reference")?,
            required(l.delays, "delays")?,
            required(l.elapsed, "elapsed")?,
            required(l.segmentation, "segmentation")?,
        )
        .map_err(|e| e.to_string())?;
        let unit = required(l.atd_unit_ms, "atd_unit_ms")?;
        let scored = ScoredInstance::new(record, unit, l.truncated.unwrap_or(false))
            .map_err(|e| e.to_string())?;
        Ok(LogEntry::Scored(scored))
    }
}

pub fn write_log<W: Write>(entries: &[LogEntry], mut out: W) -> Result<(), CliError> {
    for e in entries {
        serde_json::to_writer(&mut out, &LogLine::from(e))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_log<R: BufRead>(input: R) -> Result<Vec<LogEntry>, CliError> {
    let mut entries = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| CliError::MalformedLine {
            line: i + 1,
            message,
        };
        let parsed: LogLine = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        entries.push(LogEntry::try_from(parsed).map_err(malformed)?);
    }
    if entries.is_empty() {
        return Err(CliError::EmptyLog);
    }
    Ok(entries)
}

//! Latency metrics over per-unit delays.
//!
//! All delays and durations are in milliseconds. Each metric has a
//! computationally-aware (CA) twin obtained by feeding it the CA delays.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::InstanceRecord;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("no delays to score")]
    EmptyDelays,
    #[error("source duration must be positive")]
    NonPositiveDuration,
    #[error("length must be at least one unit")]
    ZeroLength,
}

fn check(delays: &[f64], source_ms: f64, len: usize) -> Result<(), MetricError> {
    if delays.is_empty() {
        return Err(MetricError::EmptyDelays);
    }
    if source_ms.is_nan() || source_ms <= 0.0 {
        return Err(MetricError::NonPositiveDuration);
    }
    if len == 0 {
        return Err(MetricError::ZeroLength);
    }
    Ok(())
}

/// Lagging against an ideal translator that spreads `schedule_len` units
/// evenly over the source, averaged up to and including the first unit
/// emitted once the whole source was read.
fn lagging(delays: &[f64], source_ms: f64, schedule_len: usize) -> f64 {
    let tau = delays
        .iter()
        .position(|d| *d >= source_ms)
        .map_or(delays.len(), |i| i + 1);
    let rate = source_ms / schedule_len as f64;
    let lag: f64 = delays[..tau]
        .iter()
        .enumerate()
        .map(|(i, d)| d - i as f64 * rate)
        .sum();
    lag / tau as f64
}

/// Average Lagging.
pub fn average_lagging(delays: &[f64], source_ms: f64, ref_len: usize) -> Result<f64, MetricError> {
    check(delays, source_ms, ref_len)?;
    Ok(lagging(delays, source_ms, ref_len))
}

/// Length-adaptive Average Lagging: the ideal schedule uses the longer of
/// hypothesis and reference.
pub fn laal(delays: &[f64], source_ms: f64, ref_len: usize) -> Result<f64, MetricError> {
    check(delays, source_ms, ref_len)?;
    Ok(lagging(delays, source_ms, ref_len.max(delays.len())))
}

/// Average Token Delay.
///
/// Source unit `k` (1-based) ends at `min(k · unit_ms, T)`; target unit `i`
/// is paired with source unit `min(i, n_source_units)`. Text output has no
/// playback duration.
pub fn atd(
    delays: &[f64],
    source_ms: f64,
    n_source_units: usize,
    unit_ms: f64,
) -> Result<f64, MetricError> {
    check(delays, source_ms, n_source_units)?;
    let end = |k: usize| (k as f64 * unit_ms).min(source_ms);
    let total: f64 = delays
        .iter()
        .enumerate()
        .map(|(i, d)| d - end((i + 1).min(n_source_units)))
        .sum();
    Ok(total / delays.len() as f64)
}

/// Source units used for ATD: fixed-length audio segments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceUnits {
    pub count: usize,
    pub unit_ms: f64,
}

impl SourceUnits {
    /// Cuts `source_ms` into `unit_ms` segments (the last may be partial).
    pub fn segments(source_ms: f64, unit_ms: f64) -> Self {
        let count = ((source_ms / unit_ms).ceil() as usize).max(1);
        Self { count, unit_ms }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub al_ms: f64,
    pub laal_ms: f64,
    pub atd_ms: f64,
    pub al_ca_ms: f64,
    pub laal_ca_ms: f64,
    pub atd_ca_ms: f64,
}

impl LatencyReport {
    /// Unweighted mean over instances.
    pub fn mean(reports: &[LatencyReport]) -> Option<LatencyReport> {
        if reports.is_empty() {
            return None;
        }
        let n = reports.len() as f64;
        let avg = |f: fn(&LatencyReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        Some(LatencyReport {
            al_ms: avg(|r| r.al_ms),
            laal_ms: avg(|r| r.laal_ms),
            atd_ms: avg(|r| r.atd_ms),
            al_ca_ms: avg(|r| r.al_ca_ms),
            laal_ca_ms: avg(|r| r.laal_ca_ms),
            atd_ca_ms: avg(|r| r.atd_ca_ms),
        })
    }
}

/// All six latency values for one instance.
pub fn report(instance: &InstanceRecord, source: SourceUnits) -> Result<LatencyReport, MetricError> {
    let t = instance.source_duration_ms();
    let ref_len = instance.ref_len();
    let d = instance.delays_ms();
    let ca = instance.ca_delays_ms();
    Ok(LatencyReport {
        al_ms: average_lagging(d, t, ref_len)?,
        laal_ms: laal(d, t, ref_len)?,
        atd_ms: atd(d, t, source.count, source.unit_ms)?,
        al_ca_ms: average_lagging(ca, t, ref_len)?,
        laal_ca_ms: laal(ca, t, ref_len)?,
        atd_ca_ms: atd(ca, t, source.count, source.unit_ms)?,
    })
}

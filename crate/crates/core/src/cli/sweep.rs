use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{evaluate, AggregateReport, CliError, EvalSettings, Manifest};
use crate::model::ModelSpec;
use crate::types::LayerSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Layer,
    F,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Layer => "layer",
            SweepAxis::F => "f",
        }
    }
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "layer" => Ok(SweepAxis::Layer),
            "f" => Ok(SweepAxis::F),
            other => Err(format!("expected layer or f, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SweepValue {
    F(usize),
    Layer(LayerSpec),
}

impl fmt::Display for SweepValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepValue::F(v) => write!(f, "{v}"),
            SweepValue::Layer(l) => write!(f, "{l}"),
        }
    }
}

/// An axis and the values to try on it, sorted and deduplicated.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    axis: SweepAxis,
    values: Vec<SweepValue>,
}

impl SweepSpec {
    /// `values` is a comma-separated list; integer ranges `a..b` or `a-b`
    /// are inclusive. Layer sweeps also accept `avg`.
    pub fn parse(axis: SweepAxis, values: &str) -> Result<Self, String> {
        let mut out = Vec::new();
        for item in values.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let range = item
                .split_once("..")
                .or_else(|| item.split_once('-'))
                .and_then(|(a, b)| Some((a.trim().parse::<usize>().ok()?, b.trim().parse::<usize>().ok()?)));
            let numbers: Vec<usize> = match range {
                Some((a, b)) if a <= b => (a..=b).collect(),
                Some(_) => return Err(format!("empty range `{item}`")),
                None => match item.parse::<usize>() {
                    Ok(v) => vec![v],
                    Err(_) if axis == SweepAxis::Layer => {
                        out.push(SweepValue::Layer(item.parse::<LayerSpec>().map_err(|e| e.to_string())?));
                        continue;
                    }
                    Err(_) => return Err(format!("invalid f value `{item}`")),
                },
            };
            out.extend(numbers.into_iter().map(|v| match axis {
                SweepAxis::F => SweepValue::F(v),
                SweepAxis::Layer => SweepValue::Layer(LayerSpec::Index(v)),
            }));
        }
        if out.is_empty() {
            return Err("no sweep values".into());
        }
        out.sort();
        out.dedup();
        Ok(Self { axis, values: out })
    }

    pub fn axis(&self) -> SweepAxis {
        self.axis
    }

    pub fn values(&self) -> &[SweepValue] {
        &self.values
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: SweepValue,
    pub report: Option<AggregateReport>,
    /// First failure seen for this value; the row is failed when set.
    pub error: Option<String>,
}

impl SweepRow {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Evaluates the manifest once per value, everything else held fixed.
pub fn run_sweep(
    manifest: &Manifest,
    model: &ModelSpec,
    base: &EvalSettings,
    spec: &SweepSpec,
) -> Result<Vec<SweepRow>, CliError> {
    let mut rows = Vec::with_capacity(spec.values.len());
    for &value in &spec.values {
        let config = match value {
            SweepValue::F(f) => base.config.clone().with_f(f),
            SweepValue::Layer(l) => base.config.clone().with_layer(l),
        };
        let config = match config {
            Ok(c) => c,
            Err(e) => {
                rows.push(SweepRow {
                    value,
                    report: None,
                    error: Some(e.to_string()),
                });
                continue;
            }
        };
        let settings = EvalSettings {
            config,
            ..base.clone()
        };
        let eval = evaluate(manifest, model, &settings)?;
        let error = eval.failed().next().and_then(|e| e.error()).map(str::to_owned);
        rows.push(SweepRow {
            value,
            report: Some(eval.report),
            error,
        });
    }
    Ok(rows)
}

pub fn write_sweep_csv<W: Write>(axis: SweepAxis, rows: &[SweepRow], out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        axis.name(),
        "status",
        "bleu",
        "al_ms",
        "laal_ms",
        "atd_ms",
        "al_ca_ms",
        "laal_ca_ms",
        "atd_ca_ms",
        "mean_delay_ms",
        "n_failed",
        "error",
    ])?;
    let num = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for row in rows {
        let report = row.report.as_ref();
        let lat = report.and_then(|r| r.latency);
        w.write_record([
            row.value.to_string(),
            if row.ok() { "ok" } else { "failed" }.to_owned(),
            num(report.and_then(|r| r.bleu_score())),
            num(lat.map(|l| l.al_ms)),
            num(lat.map(|l| l.laal_ms)),
            num(lat.map(|l| l.atd_ms)),
            num(lat.map(|l| l.al_ca_ms)),
            num(lat.map(|l| l.laal_ca_ms)),
            num(lat.map(|l| l.atd_ca_ms)),
            num(report.and_then(|r| r.mean_delay_ms)),
            report.map(|r| r.failed.to_string()).unwrap_or_default(),
            row.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

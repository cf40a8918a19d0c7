use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{CliError, LogEntry, ScoredInstance};
use crate::bleu::{self, BleuScore, BleuTokenizer};
use crate::latency::LatencyReport;
use crate::types::Segmentation;

/// Corpus-level results. Latencies are unweighted means over scored
/// instances, in milliseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub instances: usize,
    pub failed: usize,
    pub segmentation: Option<Segmentation>,
    pub tokenizer: Option<BleuTokenizer>,
    pub bleu: Option<BleuScore>,
    pub latency: Option<LatencyReport>,
    /// Mean over instances of the mean per-unit delay.
    pub mean_delay_ms: Option<f64>,
}

impl AggregateReport {
    pub fn bleu_score(&self) -> Option<f64> {
        self.bleu.as_ref().map(|b| b.score)
    }
}

pub fn tokenizer_for(segmentation: Segmentation) -> BleuTokenizer {
    match segmentation {
        Segmentation::Word => BleuTokenizer::Thirteen,
        Segmentation::Character => BleuTokenizer::Char,
    }
}

/// Recomputes every number from the records, so a report built from a
/// log read back from disk matches the one built during evaluation.
pub fn aggregate(entries: &[LogEntry]) -> Result<AggregateReport, CliError> {
    let scored: Vec<&ScoredInstance> = entries
        .iter()
        .filter_map(|e| match e {
            LogEntry::Scored(s) => Some(s),
            LogEntry::Failed { .. } => None,
        })
        .collect();
    let failed = entries.len() - scored.len();

    let segmentation = match scored.first() {
        None => None,
        Some(first) => {
            let seg = first.record.segmentation();
            if scored.iter().any(|s| s.record.segmentation() != seg) {
                return Err(CliError::MixedSegmentation);
            }
            Some(seg)
        }
    };
    let tokenizer = segmentation.map(tokenizer_for);

    let bleu = match tokenizer {
        None => None,
        Some(tok) => {
            let hyps: Vec<&str> = scored.iter().map(|s| s.record.hypothesis()).collect();
            let refs: Vec<&str> = scored.iter().map(|s| s.record.reference()).collect();
            Some(bleu::corpus_bleu(&hyps, &refs, tok)?)
        }
    };

    let metrics: Vec<LatencyReport> = scored.iter().map(|s| s.metrics).collect();
    let mean_delay_ms = if scored.is_empty() {
        None
    } else {
        let per_instance = scored.iter().map(|s| {
            let d = s.record.delays_ms();
            d.iter().sum::<f64>() / d.len() as f64
        });
        Some(per_instance.sum::<f64>() / scored.len() as f64)
    };

    Ok(AggregateReport {
        instances: entries.len(),
        failed,
        segmentation,
        tokenizer,
        bleu,
        latency: LatencyReport::mean(&metrics),
        mean_delay_ms,
    })
}

/// Plain-text summary with latencies in seconds.
pub fn render_table(report: &AggregateReport) -> String {
    let mut out = String::new();
    let secs = |v: f64| format!("{:.2}", v / 1000.0);
    let _ = writeln!(
        out,
        "instances {}  failed {}  tokenizer {}",
        report.instances,
        report.failed,
        match report.tokenizer {
            Some(BleuTokenizer::Thirteen) => "13a",
            Some(BleuTokenizer::Char) => "char",
            None => "-",
        }
    );
    let _ = writeln!(
        out,
        "{:>7} {:>6} {:>6} {:>6} {:>9} {:>9} {:>9}",
        "BLEU", "AL", "LAAL", "ATD", "AL_CA", "LAAL_CA", "ATD_CA"
    );
    let bleu = report
        .bleu_score()
        .map(|b| format!("{b:.2}"))
        .unwrap_or_else(|| "-".into());
    match report.latency {
        Some(l) => {
            let _ = writeln!(
                out,
                "{:>7} {:>6} {:>6} {:>6} {:>9} {:>9} {:>9}",
                bleu,
                secs(l.al_ms),
                secs(l.laal_ms),
                secs(l.atd_ms),
                secs(l.al_ca_ms),
                secs(l.laal_ca_ms),
                secs(l.atd_ca_ms)
            );
        }
        None => {
            let _ = writeln!(out, "{bleu:>7} (no scored instances)");
        }
    }
    out
}

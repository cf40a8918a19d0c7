//! Attention-alignment emission policy.
//!
//! A candidate token is aligned to the encoder frame it attends to most.
//! If that frame is one of the last `f` frames received, emission stops and
//! the session reads more source; otherwise the token is emitted.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{AttentionMatrix, LayerSpec, PolicyConfig};

/// Added to every column sum before frame-wise division.
pub const NORMALIZATION_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolicyError {
    #[error("layer {layer} is out of range for a {n_layers}-layer model")]
    LayerOutOfRange { layer: usize, n_layers: usize },
    #[error("cannot align an empty attention row")]
    EmptyRow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    #[serde(rename = "emit")]
    Emit,
    #[serde(rename = "stop")]
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    /// 0-based index of the aligned encoder frame.
    pub frame_index: usize,
    pub score: f64,
}

/// Divides every entry by its column sum (over rows, per layer) plus
/// [`NORMALIZATION_EPS`].
pub fn normalize_framewise(attention: &AttentionMatrix) -> AttentionMatrix {
    let (layers, rows, cols) = (attention.layers(), attention.rows(), attention.cols());
    let mut out = Vec::with_capacity(attention.scores().len());
    for l in 0..layers {
        let mut sums = vec![0.0; cols];
        for r in 0..rows {
            for (s, v) in sums.iter_mut().zip(attention.row(l, r)) {
                *s += v;
            }
        }
        for r in 0..rows {
            out.extend(
                attention
                    .row(l, r)
                    .iter()
                    .zip(&sums)
                    .map(|(v, s)| v / (s + NORMALIZATION_EPS)),
            );
        }
    }
    AttentionMatrix::new(layers, rows, cols, out).expect("normalization preserves shape and sign")
}

/// Picks one layer (1-based) or the element-wise mean over all layers.
pub fn select_layer(
    attention: &AttentionMatrix,
    layer: LayerSpec,
) -> Result<AttentionMatrix, PolicyError> {
    let (layers, rows, cols) = (attention.layers(), attention.rows(), attention.cols());
    let scores = match layer {
        LayerSpec::Index(i) if i == 0 || i > layers => {
            return Err(PolicyError::LayerOutOfRange {
                layer: i,
                n_layers: layers,
            })
        }
        LayerSpec::Index(i) => attention.layer(i - 1).to_vec(),
        LayerSpec::Average => {
            let mut acc = vec![0.0; rows * cols];
            for l in 0..layers {
                for (a, v) in acc.iter_mut().zip(attention.layer(l)) {
                    *a += v;
                }
            }
            acc.iter_mut().for_each(|a| *a /= layers as f64);
            acc
        }
    };
    Ok(AttentionMatrix::new(1, rows, cols, scores).expect("selection preserves validity"))
}

/// Arg-max over a row; ties go to the earliest frame.
pub fn align(row: &[f64]) -> Result<AlignmentResult, PolicyError> {
    let (first, rest) = row.split_first().ok_or(PolicyError::EmptyRow)?;
    let mut best = AlignmentResult {
        frame_index: 0,
        score: *first,
    };
    for (i, &v) in rest.iter().enumerate() {
        if v > best.score {
            best = AlignmentResult {
                frame_index: i + 1,
                score: v,
            };
        }
    }
    Ok(best)
}

/// Stops when the aligned frame is among the last `f` of `n_frames`,
/// unless the source has finished (flush mode always emits).
pub fn decide(
    alignment: AlignmentResult,
    n_frames: usize,
    f: usize,
    source_finished: bool,
) -> Decision {
    if source_finished {
        return Decision::Emit;
    }
    if alignment.frame_index + f >= n_frames {
        Decision::Stop
    } else {
        Decision::Emit
    }
}

/// Runs the full pipeline on the attention observed so far; the candidate
/// token is the last row.
pub fn evaluate_candidate(
    attention: &AttentionMatrix,
    config: &PolicyConfig,
    source_finished: bool,
) -> Result<(AlignmentResult, Decision), PolicyError> {
    let normalized;
    let source = if config.normalize_framewise() {
        normalized = normalize_framewise(attention);
        &normalized
    } else {
        attention
    };
    let selected = select_layer(source, config.layer())?;
    let alignment = align(selected.row(0, selected.rows() - 1))?;
    let decision = decide(alignment, attention.cols(), config.f(), source_finished);
    Ok((alignment, decision))
}

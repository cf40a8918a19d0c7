use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{eos_token, token_id, Frame, IncrementalModel, ModelError, DEFAULT_FRAME_MS};
use crate::types::{AttentionMatrix, InvariantViolation, ModelStep, Token};

/// Parameters of [`DiagonalToyModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalConfig {
    /// Source symbol → target symbol. Unmapped symbols copy through.
    #[serde(default)]
    pub vocab: BTreeMap<String, String>,
    /// Gaussian width of the attention around the diagonal; 0 is one-hot.
    #[serde(default)]
    pub spread: f64,
    /// Target units per source frame.
    #[serde(default = "one")]
    pub len_ratio: f64,
    #[serde(default = "one_layer")]
    pub n_layers: usize,
    #[serde(default = "default_frame_ms")]
    pub frame_ms: f64,
    /// Prepended to every surface; `" "` marks word starts, `""` suits
    /// character-level output.
    #[serde(default = "space")]
    pub separator: String,
}

fn one() -> f64 {
    1.0
}

fn one_layer() -> usize {
    1
}

fn default_frame_ms() -> f64 {
    DEFAULT_FRAME_MS
}

fn space() -> String {
    " ".to_owned()
}

impl Default for DiagonalConfig {
    fn default() -> Self {
        Self {
            vocab: BTreeMap::new(),
            spread: 0.0,
            len_ratio: 1.0,
            n_layers: 1,
            frame_ms: DEFAULT_FRAME_MS,
            separator: space(),
        }
    }
}

impl DiagonalConfig {
    pub fn validate(&self) -> Result<(), InvariantViolation> {
        if !(self.spread.is_finite() && self.spread >= 0.0) {
            return Err(InvariantViolation::new("spread", "spread ≥ 0"));
        }
        if !(self.len_ratio.is_finite() && self.len_ratio > 0.0) {
            return Err(InvariantViolation::new("len_ratio", "len_ratio > 0"));
        }
        if self.n_layers == 0 {
            return Err(InvariantViolation::new("n_layers", "n_layers ≥ 1"));
        }
        if !(self.frame_ms.is_finite() && self.frame_ms > 0.0) {
            return Err(InvariantViolation::new("frame_ms", "frame_ms > 0"));
        }
        Ok(())
    }
}

/// Deterministic toy translator whose attention follows the diagonal.
///
/// Target position `i` attends around source frame `i / len_ratio` and
/// translates the symbol found there. The hypothesis has
/// `max(1, round(frames × len_ratio))` tokens for the frames received so far,
/// after which EOS is predicted.
#[derive(Debug, Clone)]
pub struct DiagonalToyModel {
    config: DiagonalConfig,
    frames: Vec<Frame>,
    finished: bool,
}

impl DiagonalToyModel {
    pub fn new(config: DiagonalConfig) -> Result<Self, ModelError> {
        config.validate()?;
        Ok(Self {
            config,
            frames: Vec::new(),
            finished: false,
        })
    }

    pub fn config(&self) -> &DiagonalConfig {
        &self.config
    }

    fn target_len(&self) -> usize {
        let n = self.frames.len() as f64;
        ((n * self.config.len_ratio).round() as usize).max(1)
    }

    fn center(&self, position: usize) -> f64 {
        position as f64 / self.config.len_ratio
    }

    fn aligned_frame(&self, position: usize) -> usize {
        (self.center(position).round() as usize).min(self.frames.len() - 1)
    }

    /// Attention row for target `position` over the current frames.
    pub fn attention_row(&self, position: usize) -> Vec<f64> {
        let n = self.frames.len();
        let one_hot = |k: usize| {
            let mut row = vec![0.0; n];
            row[k] = 1.0;
            row
        };
        if self.config.spread == 0.0 {
            return one_hot(self.aligned_frame(position));
        }
        let c = self.center(position);
        let two_var = 2.0 * self.config.spread * self.config.spread;
        let weights: Vec<f64> = (0..n)
            .map(|j| (-(j as f64 - c).powi(2) / two_var).exp())
            .collect();
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return one_hot(self.aligned_frame(position));
        }
        weights.into_iter().map(|w| w / total).collect()
    }

    fn translate(&self, frame: usize) -> String {
        let source = match &self.frames[frame] {
            Frame::Symbol(s) => s.clone(),
            Frame::Opaque => format!("w{frame}"),
        };
        self.config.vocab.get(&source).cloned().unwrap_or(source)
    }
}

impl IncrementalModel for DiagonalToyModel {
    fn n_layers(&self) -> usize {
        self.config.n_layers
    }

    fn frame_ms(&self) -> f64 {
        self.config.frame_ms
    }

    fn frames_received(&self) -> usize {
        self.frames.len()
    }

    fn reset(&mut self) -> Result<(), ModelError> {
        self.frames.clear();
        self.finished = false;
        Ok(())
    }

    fn append_frames(&mut self, frames: &[Frame], is_final: bool) -> Result<usize, ModelError> {
        if self.finished {
            return Err(ModelError::SourceAlreadyFinished);
        }
        if frames.is_empty() {
            return Err(ModelError::EmptyAppend);
        }
        self.frames.extend_from_slice(frames);
        self.finished = is_final;
        Ok(self.frames.len())
    }

    fn step(&mut self, prefix: &[Token]) -> Result<ModelStep, ModelError> {
        if self.frames.is_empty() {
            return Err(ModelError::NoFramesAvailable);
        }
        let position = prefix.len();
        let row = self.attention_row(position);
        let attention =
            AttentionMatrix::from_layer_rows(vec![row; self.config.n_layers])?;
        let (token, is_eos) = if position >= self.target_len() {
            (eos_token(), true)
        } else {
            let target = self.translate(self.aligned_frame(position));
            let surface = format!("{}{}", self.config.separator, target);
            (Token::new(token_id(&target), surface), false)
        };
        Ok(ModelStep::new(token, is_eos, attention)?)
    }
}

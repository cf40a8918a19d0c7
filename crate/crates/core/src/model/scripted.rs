use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Frame, IncrementalModel, ModelError, DEFAULT_FRAME_MS};
use crate::types::{AttentionMatrix, InvariantViolation, ModelStep, Token};

/// One scripted reply, keyed by the state it answers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub frames_received: usize,
    pub prefix_len: usize,
    pub token: Token,
    #[serde(default)]
    pub is_eos: bool,
    /// One attention row per layer, each of length `frames_received`.
    pub attention: Vec<Vec<f64>>,
}

/// A fixed table of model replies. JSON form:
/// `{"n_layers": N, "frame_ms": F, "steps": [ScriptEntry, ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScriptRepr", into = "ScriptRepr")]
pub struct Script {
    n_layers: usize,
    frame_ms: f64,
    steps: HashMap<(usize, usize), ModelStep>,
}

#[derive(Serialize, Deserialize)]
struct ScriptRepr {
    n_layers: usize,
    #[serde(default = "default_frame_ms")]
    frame_ms: f64,
    steps: Vec<ScriptEntry>,
}

fn default_frame_ms() -> f64 {
    DEFAULT_FRAME_MS
}

impl TryFrom<ScriptRepr> for Script {
    type Error = InvariantViolation;

    fn try_from(r: ScriptRepr) -> Result<Self, Self::Error> {
        Script::new(r.n_layers, r.frame_ms, r.steps)
    }
}

impl From<Script> for ScriptRepr {
    fn from(s: Script) -> Self {
        let mut steps: Vec<ScriptEntry> = s
            .steps
            .into_iter()
            .map(|((frames_received, prefix_len), step)| {
                let (token, is_eos, attention) = step.into_parts();
                ScriptEntry {
                    frames_received,
                    prefix_len,
                    token,
                    is_eos,
                    attention: (0..attention.layers())
                        .map(|l| attention.row(l, 0).to_vec())
                        .collect(),
                }
            })
            .collect();
        steps.sort_by_key(|e| (e.frames_received, e.prefix_len));
        ScriptRepr {
            n_layers: s.n_layers,
            frame_ms: s.frame_ms,
            steps,
        }
    }
}

impl Script {
    pub fn new(
        n_layers: usize,
        frame_ms: f64,
        entries: Vec<ScriptEntry>,
    ) -> Result<Self, InvariantViolation> {
        if n_layers == 0 {
            return Err(InvariantViolation::new("n_layers", "n_layers ≥ 1"));
        }
        if !(frame_ms.is_finite() && frame_ms > 0.0) {
            return Err(InvariantViolation::new("frame_ms", "frame_ms > 0"));
        }
        let mut steps = HashMap::with_capacity(entries.len());
        for (i, e) in entries.into_iter().enumerate() {
            let field = |name: &str| format!("steps[{i}].{name}");
            if e.attention.len() != n_layers {
                return Err(InvariantViolation::new(
                    field("attention"),
                    format!("expected {n_layers} layers, got {}", e.attention.len()),
                ));
            }
            let key = (e.frames_received, e.prefix_len);
            let attention = AttentionMatrix::from_layer_rows(e.attention)
                .map_err(|v| InvariantViolation::new(field("attention"), v.message))?;
            let step = ModelStep::new(e.token, e.is_eos, attention)?;
            step.check_frames(e.frames_received)
                .map_err(|v| InvariantViolation::new(field("attention"), v.message))?;
            if steps.insert(key, step).is_some() {
                return Err(InvariantViolation::new(
                    field("prefix_len"),
                    format!("duplicate entry for state {key:?}"),
                ));
            }
        }
        Ok(Self {
            n_layers,
            frame_ms,
            steps,
        })
    }

    pub fn n_layers(&self) -> usize {
        self.n_layers
    }

    pub fn frame_ms(&self) -> f64 {
        self.frame_ms
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn get(&self, frames_received: usize, prefix_len: usize) -> Option<&ModelStep> {
        self.steps.get(&(frames_received, prefix_len))
    }
}

/// Replays a [`Script`]; the reply depends only on the frame count and the
/// prefix length.
#[derive(Debug, Clone)]
pub struct ScriptedModel {
    script: Arc<Script>,
    frames: usize,
    finished: bool,
}

impl ScriptedModel {
    pub fn new(script: Arc<Script>) -> Self {
        Self {
            script,
            frames: 0,
            finished: false,
        }
    }
}

impl IncrementalModel for ScriptedModel {
    fn n_layers(&self) -> usize {
        self.script.n_layers
    }

    fn frame_ms(&self) -> f64 {
        self.script.frame_ms
    }

    fn frames_received(&self) -> usize {
        self.frames
    }

    fn reset(&mut self) -> Result<(), ModelError> {
        self.frames = 0;
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
        self.frames += frames.len();
        self.finished = is_final;
        Ok(self.frames)
    }

    fn step(&mut self, prefix: &[Token]) -> Result<ModelStep, ModelError> {
        if self.frames == 0 {
            return Err(ModelError::NoFramesAvailable);
        }
        self.script
            .get(self.frames, prefix.len())
            .cloned()
            .ok_or(ModelError::MissingScriptEntry {
                frames_received: self.frames,
                prefix_len: prefix.len(),
            })
    }
}

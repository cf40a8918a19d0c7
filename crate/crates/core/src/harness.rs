//! One simultaneous session: read source chunks, query the model, let the
//! policy decide, and record when each unit was emitted.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Frame, IncrementalModel, ModelError};
use crate::policy::{evaluate_candidate, AlignmentResult, Decision, PolicyError};
use crate::types::{
    AttentionMatrix, InstanceRecord, InvariantViolation, PolicyConfig, Segmentation, StreamState,
    Token,
};

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("a {chunk_ms} ms chunk yields no {frame_ms} ms frame")]
    ChunkTooSmall { chunk_ms: u32, frame_ms: f64 },
    #[error("source has no frames")]
    EmptySource,
    #[error(transparent)]
    Invariant(#[from] InvariantViolation),
}

/// Converts chunk durations into whole frames, carrying the fractional
/// remainder into the next chunk.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkAccumulator {
    frame_ms: f64,
    carry_ms: f64,
}

impl ChunkAccumulator {
    pub fn new(frame_ms: f64) -> Self {
        Self {
            frame_ms,
            carry_ms: 0.0,
        }
    }

    pub fn carry_ms(&self) -> f64 {
        self.carry_ms
    }

    pub fn push(&mut self, chunk_ms: u32, is_final: bool) -> Result<usize, SessionError> {
        let total = self.carry_ms + chunk_ms as f64;
        // tolerate accumulated rounding just below a frame boundary
        let frames = (total / self.frame_ms + 1e-9).floor() as usize;
        if frames == 0 && !is_final {
            return Err(SessionError::ChunkTooSmall {
                chunk_ms,
                frame_ms: self.frame_ms,
            });
        }
        self.carry_ms = (total - frames as f64 * self.frame_ms).max(0.0);
        Ok(frames)
    }
}

/// Frames produced by a single chunk on a fresh accumulator, with the
/// carried remainder in milliseconds.
pub fn chunk_to_frames(chunk_ms: u32, frame_ms: f64) -> Result<(usize, f64), SessionError> {
    let mut acc = ChunkAccumulator::new(frame_ms);
    let n = acc.push(chunk_ms, false)?;
    Ok((n, acc.carry_ms()))
}

/// Where compute cost for the computationally-aware delays comes from.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ComputeClock {
    /// Measured wall-clock of every model step plus policy evaluation.
    #[default]
    Wall,
    /// A fixed cost per model step, for reproducible runs.
    PerStep(f64),
}

impl ComputeClock {
    fn charge(&self, started: Instant) -> f64 {
        match self {
            ComputeClock::Wall => started.elapsed().as_secs_f64() * 1000.0,
            ComputeClock::PerStep(ms) => *ms,
        }
    }
}

impl fmt::Display for ComputeClock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ComputeClock::Wall => f.write_str("wall"),
            ComputeClock::PerStep(ms) if *ms == 0.0 => f.write_str("zero"),
            ComputeClock::PerStep(ms) => write!(f, "fixed:{ms}"),
        }
    }
}

impl FromStr for ComputeClock {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "wall" => Ok(ComputeClock::Wall),
            "zero" => Ok(ComputeClock::PerStep(0.0)),
            other => {
                let ms = other
                    .strip_prefix("fixed:")
                    .and_then(|v| v.parse::<f64>().ok())
                    .filter(|v| v.is_finite() && *v >= 0.0)
                    .ok_or_else(|| format!("expected wall, zero or fixed:<ms>, got `{other}`"))?;
                Ok(ComputeClock::PerStep(ms))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionOptions {
    pub clock: ComputeClock,
    /// Character that marks a word start in token surfaces.
    pub boundary_marker: char,
}

impl Default for SessionOptions {
    fn default() -> Self {
        Self {
            clock: ComputeClock::Wall,
            boundary_marker: ' ',
        }
    }
}

/// The source side of one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionInput {
    pub index: usize,
    pub id: String,
    pub frames: Vec<Frame>,
    pub duration_ms: f64,
    pub reference: String,
}

/// One policy evaluation during a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub frames_received: usize,
    pub prefix_len: usize,
    pub source_finished: bool,
    pub token: Token,
    pub is_eos: bool,
    /// Raw attention of the candidate, one row per layer.
    pub attention: AttentionMatrix,
    pub alignment: Option<AlignmentResult>,
    pub decision: Decision,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionResult {
    pub record: InstanceRecord,
    pub tokens: Vec<Token>,
    pub decisions: Vec<DecisionRecord>,
    /// Total compute charged to the session.
    pub wall_ms: f64,
    /// The length cap stopped generation.
    pub truncated: bool,
}

/// Attention rows of already emitted tokens, kept per layer at the frame
/// count they were produced with.
#[derive(Default)]
struct AttentionHistory {
    rows: Vec<AttentionMatrix>,
}

impl AttentionHistory {
    /// Full matrix for normalization: emitted rows zero-padded to the current
    /// frame count, followed by the candidate row.
    fn with_candidate(&self, candidate: &AttentionMatrix) -> AttentionMatrix {
        let (layers, cols) = (candidate.layers(), candidate.cols());
        let rows = self.rows.len() + 1;
        let mut scores = Vec::with_capacity(layers * rows * cols);
        for l in 0..layers {
            for past in &self.rows {
                let row = past.row(l, 0);
                scores.extend_from_slice(row);
                scores.extend(std::iter::repeat_n(0.0, cols - row.len()));
            }
            scores.extend_from_slice(candidate.row(l, 0));
        }
        AttentionMatrix::new(layers, rows, cols, scores).expect("padded history is valid")
    }
}

/// Runs one instance to completion.
pub fn run_session(
    model: &mut dyn IncrementalModel,
    input: &SessionInput,
    config: &PolicyConfig,
    options: &SessionOptions,
) -> Result<SessionResult, SessionError> {
    if input.frames.is_empty() {
        return Err(SessionError::EmptySource);
    }
    model.reset()?;
    if let crate::types::LayerSpec::Index(layer) = config.layer() {
        if layer > model.n_layers() {
            return Err(PolicyError::LayerOutOfRange {
                layer,
                n_layers: model.n_layers(),
            }
            .into());
        }
    }

    let total = input.frames.len();
    let chunk_ms = config.chunk_ms();
    let mut acc = ChunkAccumulator::new(model.frame_ms());
    let mut state = StreamState::new(input.duration_ms)?;
    let mut history = AttentionHistory::default();
    let mut decisions = Vec::new();
    let mut truncated = false;
    let mut delivered = 0usize;
    let mut chunks = 0u64;

    'read: loop {
        chunks += 1;
        let consumed = (chunks as f64 * chunk_ms as f64).min(input.duration_ms);
        let is_final = consumed >= input.duration_ms;
        let mut new_frames = acc.push(chunk_ms, is_final)?;
        new_frames = if is_final {
            total - delivered
        } else {
            new_frames.min(total - delivered)
        };
        if new_frames > 0 {
            model.append_frames(&input.frames[delivered..delivered + new_frames], is_final)?;
        }
        delivered += new_frames;
        state.read(new_frames, consumed, is_final);
        if new_frames == 0 && !is_final {
            continue;
        }

        loop {
            let frames = state.frames_received();
            if state.emitted_tokens().len() >= config.target_cap(frames) {
                if is_final || config.max_target_units().is_some() {
                    truncated = true;
                    break 'read;
                }
                break;
            }

            let started = Instant::now();
            let step = model.step(state.emitted_tokens())?;
            step.check_frames(frames)?;
            let (token, is_eos, attention) = step.into_parts();
            let prefix_len = state.emitted_tokens().len();

            let (alignment, decision) = if is_eos {
                // EOS ends the session in flush mode and is discarded otherwise
                let d = if is_final { Decision::Emit } else { Decision::Stop };
                (None, d)
            } else {
                let (a, d) = if config.normalize_framewise() {
                    evaluate_candidate(&history.with_candidate(&attention), config, is_final)?
                } else {
                    evaluate_candidate(&attention, config, is_final)?
                };
                (Some(a), d)
            };
            state.add_compute(options.clock.charge(started));

            decisions.push(DecisionRecord {
                frames_received: frames,
                prefix_len,
                source_finished: is_final,
                token: token.clone(),
                is_eos,
                attention: attention.clone(),
                alignment,
                decision,
            });

            match (decision, is_eos) {
                (Decision::Emit, true) => break 'read,
                (Decision::Emit, false) => {
                    state.emit(token);
                    history.rows.push(attention);
                }
                (Decision::Stop, _) => break,
            }
        }

        if is_final {
            break;
        }
    }

    let emissions: Vec<Emission> = state
        .emitted_tokens()
        .iter()
        .zip(state.delays_ms())
        .zip(state.ca_delays_ms())
        .map(|((t, d), ca)| Emission::new(t.surface.clone(), *d, *ca))
        .collect();
    let units = assign_unit_delays(&emissions, config.segmentation(), options.boundary_marker);
    let record = InstanceRecord::new(
        input.index,
        input.id.clone(),
        input.duration_ms,
        units.hypothesis,
        input.reference.clone(),
        units.delays_ms,
        units.ca_delays_ms,
        config.segmentation(),
    )?;
    Ok(SessionResult {
        record,
        tokens: state.emitted_tokens().to_vec(),
        decisions,
        wall_ms: state.compute_ms_accumulated(),
        truncated,
    })
}

/// Re-applies the policy to a decision log, using only the logged attention
/// and stream flags. Returns the recomputed decisions and emitted tokens.
pub fn replay_decisions(
    log: &[DecisionRecord],
    config: &PolicyConfig,
) -> Result<(Vec<Decision>, Vec<Token>), PolicyError> {
    let mut history = AttentionHistory::default();
    let mut decisions = Vec::with_capacity(log.len());
    let mut tokens = Vec::new();
    for entry in log {
        if entry.is_eos {
            decisions.push(if entry.source_finished {
                Decision::Emit
            } else {
                Decision::Stop
            });
            continue;
        }
        let matrix = if config.normalize_framewise() {
            history.with_candidate(&entry.attention)
        } else {
            entry.attention.clone()
        };
        let (_, decision) = evaluate_candidate(&matrix, config, entry.source_finished)?;
        if decision == Decision::Emit {
            tokens.push(entry.token.clone());
            history.rows.push(entry.attention.clone());
        }
        decisions.push(decision);
    }
    Ok((decisions, tokens))
}

/// One emission event: the surface written and when.
#[derive(Debug, Clone, PartialEq)]
pub struct Emission {
    pub surface: String,
    pub delay_ms: f64,
    pub ca_delay_ms: f64,
}

impl Emission {
    pub fn new(surface: impl Into<String>, delay_ms: f64, ca_delay_ms: f64) -> Self {
        Self {
            surface: surface.into(),
            delay_ms,
            ca_delay_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitDelays {
    pub hypothesis: String,
    pub delays_ms: Vec<f64>,
    pub ca_delays_ms: Vec<f64>,
}

/// Splits the concatenated emissions into scoring units. Each unit takes the
/// delay of the emission that wrote its last character.
pub fn assign_unit_delays(
    emissions: &[Emission],
    mode: Segmentation,
    boundary_marker: char,
) -> UnitDelays {
    // (char, emission index) for the whole output stream
    let stream: Vec<(char, usize)> = emissions
        .iter()
        .enumerate()
        .flat_map(|(i, e)| {
            e.surface
                .chars()
                .map(move |c| (if c == boundary_marker { ' ' } else { c }, i))
        })
        .collect();

    let mut words: Vec<String> = Vec::new();
    let mut delays = Vec::new();
    let mut ca = Vec::new();
    let mut current = String::new();
    let mut last_emission = None;
    let mut close_word = |word: &mut String, last: Option<usize>, words: &mut Vec<String>| {
        if let (false, Some(i)) = (word.is_empty(), last) {
            if mode == Segmentation::Word {
                delays.push(emissions[i].delay_ms);
                ca.push(emissions[i].ca_delay_ms);
            }
            words.push(std::mem::take(word));
        }
    };
    let mut char_delays = Vec::new();
    let mut char_ca = Vec::new();

    for &(c, i) in &stream {
        if c.is_whitespace() {
            close_word(&mut current, last_emission, &mut words);
        } else {
            current.push(c);
            last_emission = Some(i);
            char_delays.push(emissions[i].delay_ms);
            char_ca.push(emissions[i].ca_delay_ms);
        }
    }
    close_word(&mut current, last_emission, &mut words);

    let hypothesis = words.join(" ");
    match mode {
        Segmentation::Word => UnitDelays {
            hypothesis,
            delays_ms: delays,
            ca_delays_ms: ca,
        },
        Segmentation::Character => UnitDelays {
            hypothesis,
            delays_ms: char_delays,
            ca_delays_ms: char_ca,
        },
    }
}

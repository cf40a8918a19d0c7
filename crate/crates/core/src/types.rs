//! Shared domain values.
//!
//! Every type here validates its invariants on construction (including
//! deserialization), so a value that exists is a value that is valid.
//! [`Validate::validate`] re-checks a value and names the violated field.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// A violated invariant, with the path of the offending field.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invariant violated at `{field}`: {message}")]
pub struct InvariantViolation {
    pub field: String,
    pub message: String,
}

impl InvariantViolation {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub trait Validate {
    fn validate(&self) -> Result<(), InvariantViolation>;
}

fn check_non_negative(field: &str, values: &[f64]) -> Result<(), InvariantViolation> {
    for (i, v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(InvariantViolation::new(
                format!("{field}[{i}]"),
                "scores must be finite",
            ));
        }
        if *v < 0.0 {
            return Err(InvariantViolation::new(
                format!("{field}[{i}]"),
                "scores ≥ 0",
            ));
        }
    }
    Ok(())
}

fn check_non_decreasing(field: &str, values: &[f64]) -> Result<(), InvariantViolation> {
    for (i, pair) in values.windows(2).enumerate() {
        if pair[1] < pair[0] {
            return Err(InvariantViolation::new(
                format!("{field}[{}]", i + 1),
                format!("non-decreasing delays ({} after {})", pair[1], pair[0]),
            ));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// AttentionMatrix

/// Cross-attention scores for one or more decoder layers.
///
/// Rows are target tokens and columns are encoder frames. Storage is a
/// flat `layers × rows × cols` buffer in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMatrix {
    layers: usize,
    rows: usize,
    cols: usize,
    scores: Vec<f64>,
}

impl AttentionMatrix {
    pub fn new(
        layers: usize,
        rows: usize,
        cols: usize,
        scores: Vec<f64>,
    ) -> Result<Self, InvariantViolation> {
        let m = Self {
            layers,
            rows,
            cols,
            scores,
        };
        m.validate()?;
        Ok(m)
    }

    /// Builds a matrix from `[layer][row][col]` nesting.
    pub fn from_nested(nested: Vec<Vec<Vec<f64>>>) -> Result<Self, InvariantViolation> {
        let layers = nested.len();
        let rows = nested.first().map_or(0, Vec::len);
        let cols = nested
            .first()
            .and_then(|l| l.first())
            .map_or(0, Vec::len);
        let mut scores = Vec::with_capacity(layers * rows * cols);
        for (l, layer) in nested.into_iter().enumerate() {
            if layer.len() != rows {
                return Err(InvariantViolation::new(
                    format!("scores[{l}]"),
                    "every layer must have the same row count",
                ));
            }
            for (r, row) in layer.into_iter().enumerate() {
                if row.len() != cols {
                    return Err(InvariantViolation::new(
                        format!("scores[{l}][{r}]"),
                        "every row must have the same column count",
                    ));
                }
                scores.extend(row);
            }
        }
        Self::new(layers, rows, cols, scores)
    }

    /// Builds a single-row matrix from one attention row per layer.
    pub fn from_layer_rows(rows: Vec<Vec<f64>>) -> Result<Self, InvariantViolation> {
        Self::from_nested(rows.into_iter().map(|r| vec![r]).collect())
    }

    /// A single-layer matrix from a list of rows.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, InvariantViolation> {
        Self::from_nested(vec![rows])
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// 0-based layer slice of `rows × cols` scores.
    pub fn layer(&self, layer: usize) -> &[f64] {
        let size = self.rows * self.cols;
        &self.scores[layer * size..(layer + 1) * size]
    }

    pub fn row(&self, layer: usize, row: usize) -> &[f64] {
        let start = (layer * self.rows + row) * self.cols;
        &self.scores[start..start + self.cols]
    }

    pub fn get(&self, layer: usize, row: usize, col: usize) -> f64 {
        self.scores[(layer * self.rows + row) * self.cols + col]
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.layers)
            .map(|l| (0..self.rows).map(|r| self.row(l, r).to_vec()).collect())
            .collect()
    }
}

impl Validate for AttentionMatrix {
    fn validate(&self) -> Result<(), InvariantViolation> {
        if self.layers == 0 {
            return Err(InvariantViolation::new("layers", "layers ≥ 1"));
        }
        if self.rows == 0 {
            return Err(InvariantViolation::new("rows", "rows ≥ 1"));
        }
        if self.cols == 0 {
            return Err(InvariantViolation::new("cols", "cols ≥ 1"));
        }
        if self.scores.len() != self.layers * self.rows * self.cols {
            return Err(InvariantViolation::new(
                "scores",
                format!(
                    "expected {} scores for shape ({}, {}, {}), got {}",
                    self.layers * self.rows * self.cols,
                    self.layers,
                    self.rows,
                    self.cols,
                    self.scores.len()
                ),
            ));
        }
        check_non_negative("scores", &self.scores)
    }
}

impl Serialize for AttentionMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_nested().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for AttentionMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let nested = Vec::<Vec<Vec<f64>>>::deserialize(deserializer)?;
        Self::from_nested(nested).map_err(serde::de::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// PolicyConfig

/// Which decoder layer's cross-attention drives the policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LayerSpec {
    /// 1-based layer index.
    Index(usize),
    /// Element-wise mean over all layers.
    Average,
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSpec::Index(i) => write!(f, "{i}"),
            LayerSpec::Average => f.write_str("avg"),
        }
    }
}

impl FromStr for LayerSpec {
    type Err = InvariantViolation;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "avg" | "average" | "average-all-layers" => Ok(LayerSpec::Average),
            other => match other.parse::<usize>() {
                Ok(0) => Err(InvariantViolation::new("layer", "layer index is 1-based")),
                Ok(i) => Ok(LayerSpec::Index(i)),
                Err(_) => Err(InvariantViolation::new(
                    "layer",
                    format!("expected a 1-based index or `avg`, got `{other}`"),
                )),
            },
        }
    }
}

impl Serialize for LayerSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            LayerSpec::Index(i) => serializer.serialize_u64(*i as u64),
            LayerSpec::Average => serializer.serialize_str("avg"),
        }
    }
}

impl<'de> Deserialize<'de> for LayerSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Index(u64),
            Name(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Index(i) => i.to_string().parse(),
            Repr::Name(s) => s.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// How hypothesis and reference text are cut into latency/scoring units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Segmentation {
    #[default]
    #[serde(rename = "word")]
    Word,
    #[serde(rename = "char", alias = "character")]
    Character,
}

impl Segmentation {
    /// Splits text into units: whitespace-separated words, or Unicode
    /// scalars with whitespace dropped.
    pub fn units(self, text: &str) -> Vec<&str> {
        match self {
            Segmentation::Word => text.split_whitespace().collect(),
            Segmentation::Character => text
                .char_indices()
                .filter(|(_, c)| !c.is_whitespace())
                .map(|(i, c)| &text[i..i + c.len_utf8()])
                .collect(),
        }
    }

    pub fn count_units(self, text: &str) -> usize {
        match self {
            Segmentation::Word => text.split_whitespace().count(),
            Segmentation::Character => text.chars().filter(|c| !c.is_whitespace()).count(),
        }
    }
}

impl fmt::Display for Segmentation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Segmentation::Word => "word",
            Segmentation::Character => "char",
        })
    }
}

impl FromStr for Segmentation {
    type Err = InvariantViolation;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "word" => Ok(Segmentation::Word),
            "char" | "character" => Ok(Segmentation::Character),
            other => Err(InvariantViolation::new(
                "segmentation",
                format!("expected `word` or `char`, got `{other}`"),
            )),
        }
    }
}

/// Hyper-parameters of one simultaneous session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolicyConfigRepr")]
pub struct PolicyConfig {
    f: usize,
    layer: LayerSpec,
    normalize_framewise: bool,
    chunk_ms: u32,
    /// `None` means the dynamic cap `2 × frames_received + 20`.
    max_target_units: Option<usize>,
    #[serde(default)]
    segmentation: Segmentation,
}

#[derive(Deserialize)]
struct PolicyConfigRepr {
    f: usize,
    layer: LayerSpec,
    #[serde(default)]
    normalize_framewise: bool,
    chunk_ms: u32,
    #[serde(default)]
    max_target_units: Option<usize>,
    #[serde(default)]
    segmentation: Segmentation,
}

impl TryFrom<PolicyConfigRepr> for PolicyConfig {
    type Error = InvariantViolation;

    fn try_from(r: PolicyConfigRepr) -> Result<Self, Self::Error> {
        let c = PolicyConfig {
            f: r.f,
            layer: r.layer,
            normalize_framewise: r.normalize_framewise,
            chunk_ms: r.chunk_ms,
            max_target_units: r.max_target_units,
            segmentation: r.segmentation,
        };
        c.validate()?;
        Ok(c)
    }
}

impl PolicyConfig {
    /// A config with normalization off, the dynamic length cap and word
    /// segmentation.
    pub fn new(f: usize, layer: LayerSpec, chunk_ms: u32) -> Result<Self, InvariantViolation> {
        let c = Self {
            f,
            layer,
            normalize_framewise: false,
            chunk_ms,
            max_target_units: None,
            segmentation: Segmentation::Word,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn f(&self) -> usize {
        self.f
    }

    pub fn layer(&self) -> LayerSpec {
        self.layer
    }

    pub fn normalize_framewise(&self) -> bool {
        self.normalize_framewise
    }

    pub fn chunk_ms(&self) -> u32 {
        self.chunk_ms
    }

    pub fn max_target_units(&self) -> Option<usize> {
        self.max_target_units
    }

    pub fn segmentation(&self) -> Segmentation {
        self.segmentation
    }

    pub fn with_f(mut self, f: usize) -> Result<Self, InvariantViolation> {
        self.f = f;
        self.validate()?;
        Ok(self)
    }

    pub fn with_layer(mut self, layer: LayerSpec) -> Result<Self, InvariantViolation> {
        self.layer = layer;
        self.validate()?;
        Ok(self)
    }

    pub fn with_chunk_ms(mut self, chunk_ms: u32) -> Result<Self, InvariantViolation> {
        self.chunk_ms = chunk_ms;
        self.validate()?;
        Ok(self)
    }

    pub fn with_max_target_units(mut self, max: Option<usize>) -> Result<Self, InvariantViolation> {
        self.max_target_units = max;
        self.validate()?;
        Ok(self)
    }

    pub fn with_normalize(mut self, normalize: bool) -> Self {
        self.normalize_framewise = normalize;
        self
    }

    pub fn with_segmentation(mut self, segmentation: Segmentation) -> Self {
        self.segmentation = segmentation;
        self
    }

    /// Checks the layer index against a model's declared layer count.
    pub fn check_layers(&self, n_layers: usize) -> Result<(), InvariantViolation> {
        match self.layer {
            LayerSpec::Index(i) if i > n_layers => Err(InvariantViolation::new(
                "layer",
                format!("layer {i} exceeds the model's {n_layers} layers"),
            )),
            _ => Ok(()),
        }
    }

    /// Length cap in effect when `frames_received` frames have arrived.
    pub fn target_cap(&self, frames_received: usize) -> usize {
        self.max_target_units
            .unwrap_or(2 * frames_received + 20)
    }
}

impl Validate for PolicyConfig {
    fn validate(&self) -> Result<(), InvariantViolation> {
        if self.f < 1 {
            return Err(InvariantViolation::new("f", "f ≥ 1"));
        }
        if self.chunk_ms < 1 {
            return Err(InvariantViolation::new("chunk_ms", "chunk_ms ≥ 1"));
        }
        if let LayerSpec::Index(0) = self.layer {
            return Err(InvariantViolation::new("layer", "layer index is 1-based"));
        }
        if self.max_target_units == Some(0) {
            return Err(InvariantViolation::new(
                "max_target_units",
                "max_target_units ≥ 1",
            ));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Tokens and model steps

/// A target token: model vocabulary id plus opaque surface string.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub id: u32,
    pub surface: String,
}

impl Token {
    pub fn new(id: u32, surface: impl Into<String>) -> Self {
        Self {
            id,
            surface: surface.into(),
        }
    }
}

/// One incremental decode result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelStepRepr")]
pub struct ModelStep {
    token: Token,
    is_eos: bool,
    /// One row per layer over the frames received so far.
    attention: AttentionMatrix,
}

#[derive(Deserialize)]
struct ModelStepRepr {
    token: Token,
    is_eos: bool,
    attention: AttentionMatrix,
}

impl TryFrom<ModelStepRepr> for ModelStep {
    type Error = InvariantViolation;

    fn try_from(r: ModelStepRepr) -> Result<Self, Self::Error> {
        ModelStep::new(r.token, r.is_eos, r.attention)
    }
}

impl ModelStep {
    pub fn new(
        token: Token,
        is_eos: bool,
        attention: AttentionMatrix,
    ) -> Result<Self, InvariantViolation> {
        let s = Self {
            token,
            is_eos,
            attention,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn token(&self) -> &Token {
        &self.token
    }

    pub fn is_eos(&self) -> bool {
        self.is_eos
    }

    pub fn attention(&self) -> &AttentionMatrix {
        &self.attention
    }

    pub fn into_parts(self) -> (Token, bool, AttentionMatrix) {
        (self.token, self.is_eos, self.attention)
    }

    /// The row length must match the frames available at step time.
    pub fn check_frames(&self, frames_received: usize) -> Result<(), InvariantViolation> {
        if self.attention.cols() != frames_received {
            return Err(InvariantViolation::new(
                "attention.cols",
                format!(
                    "attention covers {} frames but {} were received",
                    self.attention.cols(),
                    frames_received
                ),
            ));
        }
        Ok(())
    }
}

impl Validate for ModelStep {
    fn validate(&self) -> Result<(), InvariantViolation> {
        self.attention.validate()?;
        if self.attention.rows() != 1 {
            return Err(InvariantViolation::new(
                "attention.rows",
                "a step carries exactly one attention row per layer",
            ));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// StreamState

/// Mutable bookkeeping of a running session.
///
/// Delays are per emitted token; unit-level delays are derived afterwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StreamStateRepr")]
pub struct StreamState {
    source_duration_ms: f64,
    frames_received: usize,
    audio_consumed_ms: f64,
    emitted_tokens: Vec<Token>,
    delays_ms: Vec<f64>,
    ca_delays_ms: Vec<f64>,
    compute_ms_accumulated: f64,
    source_finished: bool,
}

#[derive(Deserialize)]
struct StreamStateRepr {
    source_duration_ms: f64,
    frames_received: usize,
    audio_consumed_ms: f64,
    emitted_tokens: Vec<Token>,
    delays_ms: Vec<f64>,
    ca_delays_ms: Vec<f64>,
    compute_ms_accumulated: f64,
    source_finished: bool,
}

impl TryFrom<StreamStateRepr> for StreamState {
    type Error = InvariantViolation;

    fn try_from(r: StreamStateRepr) -> Result<Self, Self::Error> {
        let s = StreamState {
            source_duration_ms: r.source_duration_ms,
            frames_received: r.frames_received,
            audio_consumed_ms: r.audio_consumed_ms,
            emitted_tokens: r.emitted_tokens,
            delays_ms: r.delays_ms,
            ca_delays_ms: r.ca_delays_ms,
            compute_ms_accumulated: r.compute_ms_accumulated,
            source_finished: r.source_finished,
        };
        s.validate()?;
        Ok(s)
    }
}

impl StreamState {
    pub fn new(source_duration_ms: f64) -> Result<Self, InvariantViolation> {
        let s = Self {
            source_duration_ms,
            frames_received: 0,
            audio_consumed_ms: 0.0,
            emitted_tokens: Vec::new(),
            delays_ms: Vec::new(),
            ca_delays_ms: Vec::new(),
            compute_ms_accumulated: 0.0,
            source_finished: false,
        };
        s.validate()?;
        Ok(s)
    }

    /// Rebuilds a state from recorded parts, e.g. for auditing a log.
    pub fn from_parts(
        source_duration_ms: f64,
        emitted_tokens: Vec<Token>,
        delays_ms: Vec<f64>,
        ca_delays_ms: Vec<f64>,
        source_finished: bool,
    ) -> Result<Self, InvariantViolation> {
        let audio = delays_ms.last().copied().unwrap_or(0.0);
        let compute = ca_delays_ms.last().copied().unwrap_or(0.0) - audio;
        let s = Self {
            source_duration_ms,
            frames_received: 0,
            audio_consumed_ms: if source_finished { source_duration_ms } else { audio },
            emitted_tokens,
            delays_ms,
            ca_delays_ms,
            compute_ms_accumulated: compute.max(0.0),
            source_finished,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn source_duration_ms(&self) -> f64 {
        self.source_duration_ms
    }

    pub fn frames_received(&self) -> usize {
        self.frames_received
    }

    pub fn audio_consumed_ms(&self) -> f64 {
        self.audio_consumed_ms
    }

    pub fn emitted_tokens(&self) -> &[Token] {
        &self.emitted_tokens
    }

    pub fn delays_ms(&self) -> &[f64] {
        &self.delays_ms
    }

    pub fn ca_delays_ms(&self) -> &[f64] {
        &self.ca_delays_ms
    }

    pub fn compute_ms_accumulated(&self) -> f64 {
        self.compute_ms_accumulated
    }

    pub fn source_finished(&self) -> bool {
        self.source_finished
    }

    /// Records a READ. Audio time is clamped to the source duration.
    pub(crate) fn read(&mut self, new_frames: usize, audio_consumed_ms: f64, finished: bool) {
        self.frames_received += new_frames;
        self.audio_consumed_ms = audio_consumed_ms
            .min(self.source_duration_ms)
            .max(self.audio_consumed_ms);
        if finished {
            self.audio_consumed_ms = self.source_duration_ms;
            self.source_finished = true;
        }
    }

    pub(crate) fn add_compute(&mut self, ms: f64) {
        self.compute_ms_accumulated += ms.max(0.0);
    }

    /// Records an EMIT at the current audio and compute time.
    pub(crate) fn emit(&mut self, token: Token) {
        self.emitted_tokens.push(token);
        self.delays_ms.push(self.audio_consumed_ms);
        self.ca_delays_ms
            .push(self.audio_consumed_ms + self.compute_ms_accumulated);
    }
}

impl Validate for StreamState {
    fn validate(&self) -> Result<(), InvariantViolation> {
        if !(self.source_duration_ms.is_finite() && self.source_duration_ms > 0.0) {
            return Err(InvariantViolation::new(
                "source_duration_ms",
                "source duration must be positive",
            ));
        }
        if self.delays_ms.len() != self.emitted_tokens.len()
            || self.ca_delays_ms.len() != self.emitted_tokens.len()
        {
            return Err(InvariantViolation::new(
                "delays_ms",
                "one delay and one CA delay per emitted token",
            ));
        }
        check_non_negative("delays_ms", &self.delays_ms)?;
        check_non_negative("ca_delays_ms", &self.ca_delays_ms)?;
        check_non_decreasing("delays_ms", &self.delays_ms)?;
        for (i, (d, ca)) in self.delays_ms.iter().zip(&self.ca_delays_ms).enumerate() {
            if ca < d {
                return Err(InvariantViolation::new(
                    format!("ca_delays_ms[{i}]"),
                    "CA delay ≥ delay",
                ));
            }
        }
        if self.source_finished {
            if let Some(i) = self
                .delays_ms
                .iter()
                .position(|d| *d > self.source_duration_ms)
            {
                return Err(InvariantViolation::new(
                    format!("delays_ms[{i}]"),
                    "delay ≤ source duration",
                ));
            }
        }
        if !(self.compute_ms_accumulated.is_finite() && self.compute_ms_accumulated >= 0.0) {
            return Err(InvariantViolation::new(
                "compute_ms_accumulated",
                "compute time must be non-negative",
            ));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// InstanceRecord

/// One evaluated segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceRecordRepr")]
pub struct InstanceRecord {
    index: usize,
    id: String,
    source_duration_ms: f64,
    hypothesis: String,
    reference: String,
    delays_ms: Vec<f64>,
    ca_delays_ms: Vec<f64>,
    segmentation: Segmentation,
}

#[derive(Deserialize)]
struct InstanceRecordRepr {
    index: usize,
    id: String,
    source_duration_ms: f64,
    hypothesis: String,
    reference: String,
    delays_ms: Vec<f64>,
    ca_delays_ms: Vec<f64>,
    segmentation: Segmentation,
}

impl TryFrom<InstanceRecordRepr> for InstanceRecord {
    type Error = InvariantViolation;

    fn try_from(r: InstanceRecordRepr) -> Result<Self, Self::Error> {
        InstanceRecord::new(
            r.index,
            r.id,
            r.source_duration_ms,
            r.hypothesis,
            r.reference,
            r.delays_ms,
            r.ca_delays_ms,
            r.segmentation,
        )
    }
}

impl InstanceRecord {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        index: usize,
        id: impl Into<String>,
        source_duration_ms: f64,
        hypothesis: impl Into<String>,
        reference: impl Into<String>,
        delays_ms: Vec<f64>,
        ca_delays_ms: Vec<f64>,
        segmentation: Segmentation,
    ) -> Result<Self, InvariantViolation> {
        let r = Self {
            index,
            id: id.into(),
            source_duration_ms,
            hypothesis: hypothesis.into(),
            reference: reference.into(),
            delays_ms,
            ca_delays_ms,
            segmentation,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn source_duration_ms(&self) -> f64 {
        self.source_duration_ms
    }

    pub fn hypothesis(&self) -> &str {
        &self.hypothesis
    }

    pub fn reference(&self) -> &str {
        &self.reference
    }

    pub fn delays_ms(&self) -> &[f64] {
        &self.delays_ms
    }

    pub fn ca_delays_ms(&self) -> &[f64] {
        &self.ca_delays_ms
    }

    pub fn segmentation(&self) -> Segmentation {
        self.segmentation
    }

    pub fn hyp_len(&self) -> usize {
        self.delays_ms.len()
    }

    pub fn ref_len(&self) -> usize {
        self.segmentation.count_units(&self.reference)
    }
}

impl Validate for InstanceRecord {
    fn validate(&self) -> Result<(), InvariantViolation> {
        if !(self.source_duration_ms.is_finite() && self.source_duration_ms > 0.0) {
            return Err(InvariantViolation::new(
                "source_duration_ms",
                "source duration must be positive",
            ));
        }
        let units = self.segmentation.count_units(&self.hypothesis);
        if self.delays_ms.len() != units {
            return Err(InvariantViolation::new(
                "delays_ms",
                format!(
                    "{} delays for {} hypothesis units ({} segmentation)",
                    self.delays_ms.len(),
                    units,
                    self.segmentation
                ),
            ));
        }
        if self.ca_delays_ms.len() != units {
            return Err(InvariantViolation::new(
                "ca_delays_ms",
                format!("{} CA delays for {} hypothesis units", self.ca_delays_ms.len(), units),
            ));
        }
        check_non_negative("delays_ms", &self.delays_ms)?;
        check_non_negative("ca_delays_ms", &self.ca_delays_ms)?;
        check_non_decreasing("delays_ms", &self.delays_ms)?;
        for (i, (d, ca)) in self.delays_ms.iter().zip(&self.ca_delays_ms).enumerate() {
            if ca < d {
                return Err(InvariantViolation::new(
                    format!("ca_delays_ms[{i}]"),
                    "CA delay ≥ delay",
                ));
            }
        }
        Ok(())
    }
}

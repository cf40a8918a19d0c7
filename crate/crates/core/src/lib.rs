//! Simultaneous translation driven by cross-attention alignment.
//!
//! An incremental encoder-decoder model (anything implementing
//! [`model::IncrementalModel`]) is run over a chunked source. After every
//! read, candidate tokens are aligned to the encoder frame they attend to most
//! and emitted only while that frame is not among the last `f` received.
//! Sessions are scored with BLEU and the AL / LAAL / ATD latency metrics,
//! each also in a computation-aware variant.

pub mod bleu;
pub mod cli;
pub mod harness;
pub mod latency;
pub mod model;
pub mod policy;
pub mod types;

pub use harness::{run_session, SessionInput, SessionOptions, SessionResult};
pub use policy::{align, decide, normalize_framewise, select_layer, AlignmentResult, Decision};
pub use types::{
    AttentionMatrix, InstanceRecord, InvariantViolation, LayerSpec, ModelStep, PolicyConfig,
    Segmentation, StreamState, Token, Validate,
};

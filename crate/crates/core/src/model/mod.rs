//! Incremental encoder-decoder models.
//!
//! The harness only ever sees [`IncrementalModel`]: a black box that accepts
//! encoder frames, decodes the next greedy token for a prefix, and reports the
//! new token's cross-attention row for every decoder layer.

mod diagonal;
mod protocol;
mod remote;
mod scripted;
mod server;

use std::io;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{InvariantViolation, ModelStep, Token};

pub use diagonal::{DiagonalConfig, DiagonalToyModel};
pub use protocol::{Reply, Request};
pub use remote::RemoteModel;
pub use scripted::{Script, ScriptEntry, ScriptedModel};
pub use server::{handle_line, serve, serve_connection, ServerSession};

/// Audio represented by one encoder frame: 10 ms feature hop compressed 8×.
pub const DEFAULT_FRAME_MS: f64 = 80.0;

pub const EOS_ID: u32 = 2;
pub const EOS_SURFACE: &str = "</s>";

pub fn eos_token() -> Token {
    Token::new(EOS_ID, EOS_SURFACE)
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("no source frames available")]
    NoFramesAvailable,
    #[error("source already finished")]
    SourceAlreadyFinished,
    #[error("cannot append an empty chunk")]
    EmptyAppend,
    #[error("script has no entry for frames_received={frames_received}, prefix_len={prefix_len}")]
    MissingScriptEntry {
        frames_received: usize,
        prefix_len: usize,
    },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("transport error: {0}")]
    Transport(#[from] io::Error),
    #[error("remote model error: {0}")]
    Remote(String),
    #[error("invalid model: {0}")]
    Invalid(#[from] InvariantViolation),
}

/// One source frame. Toy models read the symbol; real adapters keep audio on
/// their side and only count frames.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Frame {
    Symbol(String),
    Opaque,
}

impl Frame {
    pub fn symbol(&self) -> Option<&str> {
        match self {
            Frame::Symbol(s) => Some(s),
            Frame::Opaque => None,
        }
    }
}

impl From<&str> for Frame {
    fn from(s: &str) -> Self {
        Frame::Symbol(s.to_owned())
    }
}

pub trait IncrementalModel: Send {
    fn n_layers(&self) -> usize;

    /// Milliseconds of source audio per encoder frame.
    fn frame_ms(&self) -> f64;

    fn frames_received(&self) -> usize;

    /// Drops all frames and decoding state.
    fn reset(&mut self) -> Result<(), ModelError>;

    /// Appends a non-empty chunk and returns the new frame count.
    fn append_frames(&mut self, frames: &[Frame], is_final: bool) -> Result<usize, ModelError>;

    /// Greedy next token for `prefix` given the frames so far.
    fn step(&mut self, prefix: &[Token]) -> Result<ModelStep, ModelError>;
}

impl<M: IncrementalModel + ?Sized> IncrementalModel for Box<M> {
    fn n_layers(&self) -> usize {
        (**self).n_layers()
    }

    fn frame_ms(&self) -> f64 {
        (**self).frame_ms()
    }

    fn frames_received(&self) -> usize {
        (**self).frames_received()
    }

    fn reset(&mut self) -> Result<(), ModelError> {
        (**self).reset()
    }

    fn append_frames(&mut self, frames: &[Frame], is_final: bool) -> Result<usize, ModelError> {
        (**self).append_frames(frames, is_final)
    }

    fn step(&mut self, prefix: &[Token]) -> Result<ModelStep, ModelError> {
        (**self).step(prefix)
    }
}

/// How to build a fresh model instance for each session.
#[derive(Debug, Clone)]
pub enum ModelSpec {
    Diagonal(DiagonalConfig),
    Scripted(Arc<Script>),
    /// `host:port` of a model server speaking the line protocol.
    Remote(String),
}

impl ModelSpec {
    pub fn instantiate(&self) -> Result<Box<dyn IncrementalModel>, ModelError> {
        Ok(match self {
            ModelSpec::Diagonal(cfg) => Box::new(DiagonalToyModel::new(cfg.clone())?),
            ModelSpec::Scripted(script) => Box::new(ScriptedModel::new(Arc::clone(script))),
            ModelSpec::Remote(addr) => Box::new(RemoteModel::connect(addr)?),
        })
    }
}

/// Decodes with the whole source available, until EOS or `max_len` tokens.
pub fn offline_decode<M: IncrementalModel + ?Sized>(
    model: &mut M,
    frames: &[Frame],
    max_len: usize,
) -> Result<Vec<Token>, ModelError> {
    model.reset()?;
    model.append_frames(frames, true)?;
    let mut prefix = Vec::new();
    while prefix.len() < max_len {
        let step = model.step(&prefix)?;
        if step.is_eos() {
            break;
        }
        prefix.push(step.token().clone());
    }
    Ok(prefix)
}

/// 32-bit FNV-1a, used for stable toy vocabulary ids.
pub(crate) fn token_id(surface: &str) -> u32 {
    let mut h: u32 = 0x811c_9dc5;
    for b in surface.bytes() {
        h ^= b as u32;
        h = h.wrapping_mul(0x0100_0193);
    }
    // keep clear of the reserved special ids
    if h < 4 {
        h + 4
    } else {
        h
    }
}

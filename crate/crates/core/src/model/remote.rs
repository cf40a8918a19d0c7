use std::io::{self, BufRead, BufReader, Write};
use std::net::TcpStream;

use serde::de::DeserializeOwned;

use super::protocol::{AppendReply, Request, ResetReply, StepReply};
use super::{Frame, IncrementalModel, ModelError};
use crate::types::{AttentionMatrix, ModelStep, Token};

/// Client side of the line protocol. Only frame counts cross the wire.
#[derive(Debug)]
pub struct RemoteModel {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    n_layers: usize,
    frame_ms: f64,
    frames_received: usize,
}

impl RemoteModel {
    /// Connects and performs an initial `reset` to learn the model shape.
    pub fn connect(addr: &str) -> Result<Self, ModelError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        let writer = stream.try_clone()?;
        let mut model = Self {
            reader: BufReader::new(stream),
            writer,
            n_layers: 0,
            frame_ms: 0.0,
            frames_received: 0,
        };
        model.reset()?;
        Ok(model)
    }

    fn call<T: DeserializeOwned>(&mut self, request: &Request) -> Result<T, ModelError> {
        let mut line = serde_json::to_string(request).expect("request serializes");
        line.push('\n');
        self.writer.write_all(line.as_bytes())?;
        self.writer.flush()?;

        let mut reply = String::new();
        if self.reader.read_line(&mut reply)? == 0 {
            return Err(ModelError::Transport(io::Error::new(
                io::ErrorKind::UnexpectedEof,
                "model server closed the connection",
            )));
        }
        parse_reply(&reply)
    }
}

pub(crate) fn parse_reply<T: DeserializeOwned>(line: &str) -> Result<T, ModelError> {
    let value: serde_json::Value = serde_json::from_str(line.trim())
        .map_err(|e| ModelError::Protocol(format!("reply is not JSON: {e}")))?;
    match value.get("ok").and_then(serde_json::Value::as_bool) {
        Some(true) => {}
        Some(false) => {
            let msg = value
                .get("error")
                .and_then(serde_json::Value::as_str)
                .unwrap_or("unspecified error");
            return Err(ModelError::Remote(msg.to_owned()));
        }
        None => return Err(ModelError::Protocol("reply lacks a boolean `ok`".into())),
    }
    serde_json::from_value(value).map_err(|e| ModelError::Protocol(format!("malformed reply: {e}")))
}

impl IncrementalModel for RemoteModel {
    fn n_layers(&self) -> usize {
        self.n_layers
    }

    fn frame_ms(&self) -> f64 {
        self.frame_ms
    }

    fn frames_received(&self) -> usize {
        self.frames_received
    }

    fn reset(&mut self) -> Result<(), ModelError> {
        let reply: ResetReply = self.call(&Request::Reset)?;
        if reply.n_layers == 0 || !(reply.frame_ms.is_finite() && reply.frame_ms > 0.0) {
            return Err(ModelError::Protocol(format!(
                "invalid model shape: n_layers={}, frame_ms={}",
                reply.n_layers, reply.frame_ms
            )));
        }
        self.n_layers = reply.n_layers;
        self.frame_ms = reply.frame_ms;
        self.frames_received = 0;
        Ok(())
    }

    fn append_frames(&mut self, frames: &[Frame], is_final: bool) -> Result<usize, ModelError> {
        if frames.is_empty() {
            return Err(ModelError::EmptyAppend);
        }
        let reply: AppendReply = self.call(&Request::Append {
            frames: frames.len(),
            is_final,
        })?;
        if reply.frames_received != self.frames_received + frames.len() {
            return Err(ModelError::Protocol(format!(
                "expected {} frames after append, server reports {}",
                self.frames_received + frames.len(),
                reply.frames_received
            )));
        }
        self.frames_received = reply.frames_received;
        Ok(self.frames_received)
    }

    fn step(&mut self, prefix: &[Token]) -> Result<ModelStep, ModelError> {
        let reply: StepReply = self.call(&Request::Step {
            prefix: prefix.iter().map(|t| t.id).collect(),
        })?;
        if reply.attention.len() != self.n_layers {
            return Err(ModelError::Protocol(format!(
                "expected {} attention layers, got {}",
                self.n_layers,
                reply.attention.len()
            )));
        }
        if let Some(bad) = reply
            .attention
            .iter()
            .find(|row| row.len() != self.frames_received)
        {
            return Err(ModelError::Protocol(format!(
                "attention row has {} entries but {} frames were received",
                bad.len(),
                self.frames_received
            )));
        }
        let attention = AttentionMatrix::from_layer_rows(reply.attention)
            .map_err(|v| ModelError::Protocol(v.to_string()))?;
        ModelStep::new(reply.token, reply.is_eos, attention)
            .map_err(|v| ModelError::Protocol(v.to_string()))
    }
}

use std::collections::HashMap;
use std::io::{self, BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::Arc;
use std::thread;

use super::protocol::{encode_err, encode_ok, Reply, Request};
use super::{Frame, IncrementalModel, ModelError};
use crate::types::Token;

/// Server-side state of one connection: the model plus the surfaces of the
/// tokens it has produced, so id-only prefixes can be turned back into tokens.
pub struct ServerSession {
    model: Box<dyn IncrementalModel>,
    surfaces: HashMap<u32, String>,
}

impl ServerSession {
    pub fn new(model: Box<dyn IncrementalModel>) -> Self {
        Self {
            model,
            surfaces: HashMap::new(),
        }
    }

    fn handle(&mut self, request: Request) -> Result<Reply, ModelError> {
        match request {
            Request::Reset => {
                self.model.reset()?;
                Ok(Reply::Reset {
                    n_layers: self.model.n_layers(),
                    frame_ms: self.model.frame_ms(),
                })
            }
            Request::Append { frames, is_final } => {
                let payload = vec![Frame::Opaque; frames];
                let frames_received = self.model.append_frames(&payload, is_final)?;
                Ok(Reply::Append { frames_received })
            }
            Request::Step { prefix } => {
                let prefix: Vec<Token> = prefix
                    .into_iter()
                    .map(|id| Token::new(id, self.surfaces.get(&id).cloned().unwrap_or_default()))
                    .collect();
                let step = self.model.step(&prefix)?;
                let (token, is_eos, attention) = step.into_parts();
                self.surfaces.insert(token.id, token.surface.clone());
                Ok(Reply::Step {
                    token,
                    is_eos,
                    attention: (0..attention.layers())
                        .map(|l| attention.row(l, 0).to_vec())
                        .collect(),
                })
            }
        }
    }
}

/// Answers one request line.
pub fn handle_line(session: &mut ServerSession, line: &str) -> String {
    match serde_json::from_str::<Request>(line.trim()) {
        Ok(request) => match session.handle(request) {
            Ok(reply) => encode_ok(&reply),
            Err(e) => encode_err(&e.to_string()),
        },
        Err(e) => encode_err(&format!("bad request: {e}")),
    }
}

/// Serves requests on one stream until the peer hangs up.
pub fn serve_connection(mut session: ServerSession, stream: TcpStream) -> io::Result<()> {
    stream.set_nodelay(true)?;
    let mut writer = stream.try_clone()?;
    let reader = BufReader::new(stream);
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut reply = handle_line(&mut session, &line);
        reply.push('\n');
        writer.write_all(reply.as_bytes())?;
        writer.flush()?;
    }
    Ok(())
}

/// Accepts connections forever; each gets a fresh model on its own thread.
pub fn serve<F>(listener: TcpListener, factory: F) -> io::Result<()>
where
    F: Fn() -> Result<Box<dyn IncrementalModel>, ModelError> + Send + Sync + 'static,
{
    let factory = Arc::new(factory);
    for stream in listener.incoming() {
        let stream = stream?;
        let factory = Arc::clone(&factory);
        thread::spawn(move || {
            let model = match factory() {
                Ok(m) => m,
                Err(e) => {
                    let mut s = stream;
                    let _ = writeln!(s, "{}", encode_err(&e.to_string()));
                    return;
                }
            };
            if let Err(e) = serve_connection(ServerSession::new(model), stream) {
                eprintln!("model connection closed: {e}");
            }
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DiagonalConfig, DiagonalToyModel, RemoteModel};

    fn session() -> ServerSession {
        ServerSession::new(Box::new(
            DiagonalToyModel::new(DiagonalConfig {
                n_layers: 2,
                ..DiagonalConfig::default()
            })
            .unwrap(),
        ))
    }

    fn parse(s: &str) -> serde_json::Value {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn line_level_exchange() {
        let mut s = session();
        let r = parse(&handle_line(&mut s, r#"{"op":"reset"}"#));
        assert_eq!((r["ok"].as_bool(), r["n_layers"].as_u64()), (Some(true), Some(2)));
        assert_eq!(r["frame_ms"].as_f64(), Some(80.0));

        let r = parse(&handle_line(&mut s, r#"{"op":"step","prefix":[]}"#));
        assert_eq!(r["ok"], false);
        assert!(r["error"].as_str().unwrap().contains("no source frames"));

        let r = parse(&handle_line(&mut s, r#"{"op":"append","frames":3,"final":false}"#));
        assert_eq!(r["frames_received"], 3);

        let r = parse(&handle_line(&mut s, r#"{"op":"step","prefix":[]}"#));
        assert_eq!(r["token"]["surface"], " w0");
        assert_eq!(r["attention"].as_array().unwrap().len(), 2);
        assert_eq!(r["attention"][1], serde_json::json!([1.0, 0.0, 0.0]));

        let r = parse(&handle_line(&mut s, r#"{"op":"dance"}"#));
        assert_eq!(r["ok"], false);
    }

    #[test]
    fn tcp_round_trip() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap().to_string();
        thread::spawn(move || {
            serve(listener, || {
                Ok(Box::new(DiagonalToyModel::new(DiagonalConfig::default())?)
                    as Box<dyn IncrementalModel>)
            })
        });
        let mut remote = RemoteModel::connect(&addr).unwrap();
        assert_eq!(remote.n_layers(), 1);
        assert_eq!(remote.append_frames(&[Frame::Opaque, Frame::Opaque], false).unwrap(), 2);
        let step = remote.step(&[]).unwrap();
        assert_eq!(step.attention().row(0, 0), &[1.0, 0.0]);
        let step = remote.step(&[step.token().clone()]).unwrap();
        assert_eq!(step.token().surface, " w1");
        remote.reset().unwrap();
        assert_eq!(remote.frames_received(), 0);
        assert!(matches!(remote.step(&[]), Err(ModelError::Remote(_))));
    }

    /// A server that answers every request with a fixed line.
    fn canned_server(reply: &'static str) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap().to_string();
        thread::spawn(move || {
            for stream in listener.incoming() {
                let stream = stream.unwrap();
                let mut writer = stream.try_clone().unwrap();
                for line in BufReader::new(stream).lines() {
                    let line = line.unwrap();
                    let out = if line.contains("reset") {
                        r#"{"ok":true,"n_layers":1,"frame_ms":80}"#
                    } else if line.contains("append") {
                        r#"{"ok":true,"frames_received":2}"#
                    } else {
                        reply
                    };
                    writeln!(writer, "{out}").unwrap();
                }
            }
        });
        addr
    }

    #[test]
    fn malformed_step_replies_are_protocol_errors() {
        for reply in [
            r#"{"ok":true,"token":{"id":1,"surface":"a"},"is_eos":false}"#,
            r#"{"ok":true,"token":{"id":1,"surface":"a"},"is_eos":false,"attention":[[1.0]]}"#,
            r#"{"ok":true,"token":{"id":1,"surface":"a"},"is_eos":false,"attention":[[1.0,-1.0]]}"#,
            "garbage",
        ] {
            let addr = canned_server(reply);
            let mut remote = RemoteModel::connect(&addr).unwrap();
            remote.append_frames(&[Frame::Opaque, Frame::Opaque], false).unwrap();
            let err = remote.step(&[]).unwrap_err();
            assert!(matches!(err, ModelError::Protocol(_)), "{reply}: {err}");
        }
    }
}

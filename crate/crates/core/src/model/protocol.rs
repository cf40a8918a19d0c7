//! Newline-delimited JSON messages between the harness and a model server.
//!
//! ```text
//! → {"op":"reset"}                          ← {"ok":true,"n_layers":N,"frame_ms":F}
//! → {"op":"append","frames":K,"final":b}    ← {"ok":true,"frames_received":M}
//! → {"op":"step","prefix":[ids...]}         ← {"ok":true,"token":{"id":I,"surface":"…"},
//!                                              "is_eos":b,"attention":[[row per layer]...]}
//! any failure                               ← {"ok":false,"error":"…"}
//! ```

use serde::{Deserialize, Serialize};

use crate::types::Token;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum Request {
    Reset,
    Append {
        frames: usize,
        #[serde(rename = "final")]
        is_final: bool,
    },
    Step {
        prefix: Vec<u32>,
    },
}

/// Successful reply payloads. The `"ok"` flag is added on the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Reply {
    Reset {
        n_layers: usize,
        frame_ms: f64,
    },
    Append {
        frames_received: usize,
    },
    Step {
        token: Token,
        is_eos: bool,
        attention: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Deserialize)]
pub(crate) struct ResetReply {
    pub n_layers: usize,
    pub frame_ms: f64,
}

#[derive(Debug, Deserialize)]
pub(crate) struct AppendReply {
    pub frames_received: usize,
}

#[derive(Debug, Deserialize)]
pub(crate) struct StepReply {
    pub token: Token,
    pub is_eos: bool,
    pub attention: Vec<Vec<f64>>,
}

pub(crate) fn encode_ok(reply: &Reply) -> String {
    let mut value = serde_json::to_value(reply).expect("reply serializes");
    if let serde_json::Value::Object(map) = &mut value {
        map.insert("ok".into(), serde_json::Value::Bool(true));
    }
    value.to_string()
}

pub(crate) fn encode_err(message: &str) -> String {
    serde_json::json!({ "ok": false, "error": message }).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_wire_form() {
        assert_eq!(
            serde_json::to_string(&Request::Reset).unwrap(),
            r#"{"op":"reset"}"#
        );
        assert_eq!(
            serde_json::to_string(&Request::Append {
                frames: 5,
                is_final: true
            })
            .unwrap(),
            r#"{"op":"append","frames":5,"final":true}"#
        );
        assert_eq!(
            serde_json::from_str::<Request>(r#"{"op":"step","prefix":[3,4]}"#).unwrap(),
            Request::Step { prefix: vec![3, 4] }
        );
    }

    #[test]
    fn replies_carry_ok_flag() {
        let text = encode_ok(&Reply::Append { frames_received: 3 });
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["ok"], true);
        assert_eq!(v["frames_received"], 3);
        let v: serde_json::Value = serde_json::from_str(&encode_err("boom")).unwrap();
        assert_eq!(v["ok"], false);
        assert_eq!(v["error"], "boom");
    }
}

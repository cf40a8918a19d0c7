use std::fs;
use std::path::Path;
use std::sync::Arc;

use super::CliError;
use crate::model::{DiagonalConfig, ModelSpec, Script};

/// Parses `builtin:diagonal`, `builtin:scripted:FILE` or `remote:HOST:PORT`.
/// `diagonal` configures the builtin diagonal model and is ignored otherwise.
pub fn parse_model_spec(spec: &str, diagonal: DiagonalConfig) -> Result<ModelSpec, CliError> {
    if spec == "builtin:diagonal" {
        diagonal
            .validate()
            .map_err(|e| CliError::ModelSpec(format!("{spec}: {e}")))?;
        return Ok(ModelSpec::Diagonal(diagonal));
    }
    if let Some(path) = spec.strip_prefix("builtin:scripted:") {
        let text = fs::read_to_string(Path::new(path))?;
        let script: Script = serde_json::from_str(&text)
            .map_err(|e| CliError::ModelSpec(format!("{path}: {e}")))?;
        return Ok(ModelSpec::Scripted(Arc::new(script)));
    }
    if let Some(addr) = spec.strip_prefix("remote:") {
        if addr.rsplit_once(':').is_some_and(|(h, p)| !h.is_empty() && p.parse::<u16>().is_ok()) {
            return Ok(ModelSpec::Remote(addr.to_owned()));
        }
    }
    Err(CliError::ModelSpec(spec.to_owned()))
}

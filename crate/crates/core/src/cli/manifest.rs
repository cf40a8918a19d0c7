use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::harness::SessionInput;
use crate::model::Frame;

/// Where an entry's source frames come from.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceSpec {
    /// Toy symbols, one per frame.
    Symbols(Vec<String>),
    /// A file of whitespace-separated symbols.
    File(PathBuf),
    /// Opaque frames; the model owns the audio.
    Count(usize),
    /// Opaque frames, as many as the duration covers at the model frame rate.
    FromDuration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub duration_ms: f64,
    pub reference: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbols: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_frames_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_frames: Option<usize>,
}

impl ManifestEntry {
    pub fn source(&self) -> Result<SourceSpec, CliError> {
        match (&self.symbols, &self.source_frames_file, self.n_frames) {
            (Some(s), None, None) => Ok(SourceSpec::Symbols(s.clone())),
            (None, Some(p), None) => Ok(SourceSpec::File(p.clone())),
            (None, None, Some(n)) => Ok(SourceSpec::Count(n)),
            (None, None, None) => Ok(SourceSpec::FromDuration),
            _ => Err(CliError::Manifest(format!(
                "entry `{}` gives more than one of symbols, source_frames_file, n_frames",
                self.id
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    /// Directory that relative frame files are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self, CliError> {
        let m = Self {
            entries,
            base_dir: PathBuf::from("."),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn from_json(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, CliError> {
        let mut m: Manifest = serde_json::from_str(text)
            .map_err(|e| CliError::Manifest(e.to_string()))?;
        m.base_dir = base_dir.into();
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&text, base)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.entries.is_empty() {
            return Err(CliError::Manifest("no entries".into()));
        }
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.id.as_str()) {
                return Err(CliError::Manifest(format!("duplicate id `{}`", e.id)));
            }
            if !(e.duration_ms.is_finite() && e.duration_ms > 0.0) {
                return Err(CliError::Manifest(format!(
                    "entry `{}` needs duration_ms > 0",
                    e.id
                )));
            }
            e.source()?;
        }
        Ok(())
    }

    /// Materializes entry `index` into session input.
    pub fn session_input(&self, index: usize, frame_ms: f64) -> Result<SessionInput, CliError> {
        let e = &self.entries[index];
        let frames = match e.source()? {
            SourceSpec::Symbols(s) => s.iter().map(|x| Frame::Symbol(x.clone())).collect(),
            SourceSpec::File(p) => {
                let path = if p.is_absolute() { p } else { self.base_dir.join(p) };
                fs::read_to_string(&path)?
                    .split_whitespace()
                    .map(Frame::from)
                    .collect()
            }
            SourceSpec::Count(n) => vec![Frame::Opaque; n],
            SourceSpec::FromDuration => {
                vec![Frame::Opaque; ((e.duration_ms / frame_ms).floor() as usize).max(1)]
            }
        };
        let frames: Vec<Frame> = frames;
        if frames.is_empty() {
            return Err(CliError::Manifest(format!("entry `{}` has no frames", e.id)));
        }
        Ok(SessionInput {
            index,
            id: e.id.clone(),
            frames,
            duration_ms: e.duration_ms,
            reference: e.reference.clone(),
        })
    }
}

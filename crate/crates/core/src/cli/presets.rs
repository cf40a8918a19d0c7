use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::types::{LayerSpec, PolicyConfig, Segmentation};

/// Per-language-pair policy settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LanguagePair {
    #[serde(rename = "en-de")]
    EnDe,
    #[serde(rename = "cs-en")]
    CsEn,
    #[serde(rename = "en-zh")]
    EnZh,
    #[serde(rename = "en-ja")]
    EnJa,
}

impl LanguagePair {
    pub const ALL: [LanguagePair; 4] = [
        LanguagePair::EnDe,
        LanguagePair::CsEn,
        LanguagePair::EnZh,
        LanguagePair::EnJa,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LanguagePair::EnDe => "en-de",
            LanguagePair::CsEn => "cs-en",
            LanguagePair::EnZh => "en-zh",
            LanguagePair::EnJa => "en-ja",
        }
    }

    /// (chunk_ms, f, layer)
    fn settings(self) -> (u32, usize, usize) {
        match self {
            LanguagePair::EnDe => (1000, 6, 4),
            LanguagePair::CsEn => (1000, 9, 4),
            LanguagePair::EnZh => (800, 1, 4),
            LanguagePair::EnJa => (400, 1, 1),
        }
    }

    /// Target languages scored per character.
    pub fn segmentation(self) -> Segmentation {
        match self {
            LanguagePair::EnZh | LanguagePair::EnJa => Segmentation::Character,
            LanguagePair::EnDe | LanguagePair::CsEn => Segmentation::Word,
        }
    }

    pub fn config(self) -> PolicyConfig {
        let (chunk_ms, f, layer) = self.settings();
        PolicyConfig::new(f, LayerSpec::Index(layer), chunk_ms)
            .expect("preset values are valid")
            .with_normalize(true)
            .with_segmentation(self.segmentation())
    }
}

impl fmt::Display for LanguagePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LanguagePair {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|p| p.as_str() == lower)
            .ok_or_else(|| format!("unknown language pair `{s}`; expected en-de, cs-en, en-zh or en-ja"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_table() {
        let rows: Vec<_> = LanguagePair::ALL
            .iter()
            .map(|p| {
                let c = p.config();
                (p.as_str(), c.chunk_ms(), c.f(), c.layer(), c.segmentation())
            })
            .collect();
        assert_eq!(
            rows,
            vec![
                ("en-de", 1000, 6, LayerSpec::Index(4), Segmentation::Word),
                ("cs-en", 1000, 9, LayerSpec::Index(4), Segmentation::Word),
                ("en-zh", 800, 1, LayerSpec::Index(4), Segmentation::Character),
                ("en-ja", 400, 1, LayerSpec::Index(1), Segmentation::Character),
            ]
        );
        assert!(LanguagePair::ALL.iter().all(|p| p.config().normalize_framewise()));
    }

    #[test]
    fn parses_names() {
        assert_eq!("EN-JA".parse::<LanguagePair>(), Ok(LanguagePair::EnJa));
        assert!("en-fr".parse::<LanguagePair>().is_err());
    }
}

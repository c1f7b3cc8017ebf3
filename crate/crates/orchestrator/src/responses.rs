//! Pre-written prompts and replies keyed by topic category and detected quadrant.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use affect_core::signal::Quadrant;

use crate::error::{OrchestratorError, Result};

/// Database shipped with the crate; see `data/responses.txt` for the format.
pub const SAMPLE_DB: &str = include_str!("../data/responses.txt");

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Section {
    Prompt(Quadrant),
    Empathetic(Quadrant, Quadrant),
    Neutral(Quadrant),
}

impl Section {
    fn parse(header: &str) -> Option<Section> {
        let words: Vec<&str> = header.split_whitespace().collect();
        let q = |s: &str| s.parse::<Quadrant>().ok();
        match words.as_slice() {
            ["prompt", c] => Some(Section::Prompt(q(c)?)),
            ["neutral", c] => Some(Section::Neutral(q(c)?)),
            ["empathetic", c, d] => Some(Section::Empathetic(q(c)?, q(d)?)),
            _ => None,
        }
    }

    fn all() -> Vec<Section> {
        let mut v = Vec::new();
        for c in Quadrant::ALL {
            v.push(Section::Prompt(c));
            v.push(Section::Neutral(c));
            for d in Quadrant::ALL {
                v.push(Section::Empathetic(c, d));
            }
        }
        v
    }
}

/// Every prompt, empathetic and neutral key is present and nonempty.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseDb {
    sections: BTreeMap<Section, Vec<String>>,
}

impl ResponseDb {
    pub fn parse(text: &str) -> Result<Self> {
        let mut sections: BTreeMap<Section, Vec<String>> = BTreeMap::new();
        let mut current: Option<Section> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(header) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let section = Section::parse(header).ok_or_else(|| OrchestratorError::ResponseDb {
                    line: i + 1,
                    message: format!("unknown section header `[{header}]`"),
                })?;
                if sections.contains_key(&section) {
                    return Err(OrchestratorError::ResponseDb {
                        line: i + 1,
                        message: format!("section `[{header}]` appears twice"),
                    });
                }
                sections.insert(section.clone(), Vec::new());
                current = Some(section);
                continue;
            }
            let Some(section) = &current else {
                return Err(OrchestratorError::ResponseDb {
                    line: i + 1,
                    message: "entry before any section header".into(),
                });
            };
            sections.get_mut(section).expect("inserted at header").push(line.to_string());
        }
        for key in Section::all() {
            if sections.get(&key).is_none_or(|v| v.is_empty()) {
                return Err(OrchestratorError::ResponseDb {
                    line: 0,
                    message: format!("missing or empty section {key:?}"),
                });
            }
        }
        Ok(Self { sections })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| OrchestratorError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn sample() -> Self {
        Self::parse(SAMPLE_DB).expect("bundled response database is complete")
    }

    pub fn entries(&self, section: &Section) -> &[String] {
        &self.sections[section]
    }
}

use std::collections::HashSet;
use std::path::Path;

use cdlr_core::study::TASKS_PER_PARTICIPANT;
use cdlr_core::CorpusEntry;
use thiserror::Error;

/// Word-count bounds every corpus email must fall within.
pub const WORD_RANGE: std::ops::RangeInclusive<usize> = 24..=155;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus invalid: {0}")]
    CorpusInvalid(String),
    #[error("corpus holds {found} emails, expected {expected}")]
    CorpusSizeMismatch { found: usize, expected: usize },
    #[error("cannot read corpus: {0}")]
    Io(#[from] std::io::Error),
}

fn parse_entry(text: &str, origin: &str) -> Result<CorpusEntry, CorpusError> {
    serde_json::from_str(text).map_err(|e| CorpusError::CorpusInvalid(format!("{origin}: {e}")))
}

/// Loads either a directory of `*.json` files (one email each, sorted by
/// file name) or a single file holding a JSON array. With `strict`, the
/// corpus must hold exactly nine emails.
pub fn load_corpus(path: &Path, strict: bool) -> Result<Vec<CorpusEntry>, CorpusError> {
    let entries = if path.is_dir() {
        let mut files: Vec<_> = std::fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        files
            .iter()
            .map(|f| parse_entry(&std::fs::read_to_string(f)?, &f.display().to_string()))
            .collect::<Result<Vec<_>, _>>()?
    } else {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str::<Vec<CorpusEntry>>(&text)
            .map_err(|e| CorpusError::CorpusInvalid(format!("{}: {e}", path.display())))?
    };
    validate(&entries, strict)?;
    Ok(entries)
}

pub fn validate(entries: &[CorpusEntry], strict: bool) -> Result<(), CorpusError> {
    if strict && entries.len() != TASKS_PER_PARTICIPANT {
        return Err(CorpusError::CorpusSizeMismatch {
            found: entries.len(),
            expected: TASKS_PER_PARTICIPANT,
        });
    }
    let mut ids = HashSet::new();
    for e in entries {
        if !ids.insert(e.id.as_str()) {
            return Err(CorpusError::CorpusInvalid(format!("duplicate id {}", e.id)));
        }
        for (name, value) in [
            ("id", &e.id),
            ("sender_name", &e.sender_name),
            ("body", &e.body),
            ("briefing_text", &e.briefing_text),
        ] {
            if value.trim().is_empty() {
                return Err(CorpusError::CorpusInvalid(format!(
                    "{}: empty {name}",
                    e.id
                )));
            }
        }
        let words = e.email().word_count();
        if !WORD_RANGE.contains(&words) {
            return Err(CorpusError::CorpusInvalid(format!(
                "{}: {words} words outside {}..={}",
                e.id,
                WORD_RANGE.start(),
                WORD_RANGE.end()
            )));
        }
    }
    Ok(())
}

/// Email ids in the order the study plan addresses them.
pub fn plan_ids(entries: &[CorpusEntry]) -> Option<[String; TASKS_PER_PARTICIPANT]> {
    let ids: Vec<String> = entries.iter().map(|e| e.id.clone()).collect();
    ids.try_into().ok()
}

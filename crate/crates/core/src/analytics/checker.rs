use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::segmenter::segment_email;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dialect {
    #[serde(rename = "en-GB")]
    EnGb,
    #[serde(rename = "en-US")]
    EnUs,
}

impl Dialect {
    pub fn code(self) -> &'static str {
        match self {
            Dialect::EnGb => "en-GB",
            Dialect::EnUs => "en-US",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckerError {
    #[error("checker unavailable: {0}")]
    CheckerUnavailable(String),
}

/// Counts spelling and grammar errors in a text for one dialect.
pub trait Checker: Send + Sync {
    fn count_errors(&self, text: &str, dialect: Dialect) -> Result<usize, CheckerError>;
}

/// (British, American) spellings. Each dialect flags the other's form.
const SPELLING_PAIRS: &[(&str, &str)] = &[
    ("colour", "color"),
    ("favourite", "favorite"),
    ("behaviour", "behavior"),
    ("organise", "organize"),
    ("organised", "organized"),
    ("realise", "realize"),
    ("apologise", "apologize"),
    ("centre", "center"),
    ("theatre", "theater"),
    ("cancelled", "canceled"),
    ("travelling", "traveling"),
    ("analyse", "analyze"),
    ("catalogue", "catalog"),
    ("programme", "program"),
];

/// Rule-based default checker.
///
/// Flags doubled words, a lowercase letter opening a sentence that follows a
/// terminated one, runs of two or more spaces, and spellings of the other
/// dialect from a short list.
#[derive(Debug, Clone, Copy, Default)]
pub struct NaiveChecker;

impl NaiveChecker {
    fn doubled_words(text: &str) -> usize {
        let words: Vec<String> = text
            .split_whitespace()
            .map(|w| {
                w.trim_matches(|c: char| !c.is_alphanumeric())
                    .to_lowercase()
            })
            .collect();
        words
            .windows(2)
            .filter(|p| !p[0].is_empty() && p[0] == p[1])
            .count()
    }

    fn lowercase_starts(text: &str) -> usize {
        let spans = segment_email(text);
        spans
            .windows(2)
            .filter(|p| {
                let prev_terminated = p[0]
                    .text
                    .trim_end_matches(['"', '\'', ')', ']', '\u{201d}', '\u{2019}'])
                    .ends_with(['.', '!', '?']);
                let starts_lower = p[1]
                    .text
                    .chars()
                    .find(|c| c.is_alphabetic())
                    .is_some_and(char::is_lowercase);
                prev_terminated && starts_lower
            })
            .count()
    }

    fn doubled_spaces(text: &str) -> usize {
        text.split(|c| c != ' ')
            .filter(|run| run.len() >= 2)
            .count()
    }

    fn dialect_spellings(text: &str, dialect: Dialect) -> usize {
        let words = super::textmetrics::lexical_words(text);
        words
            .iter()
            .filter(|w| {
                SPELLING_PAIRS.iter().any(|(gb, us)| match dialect {
                    Dialect::EnGb => w.as_str() == *us,
                    Dialect::EnUs => w.as_str() == *gb,
                })
            })
            .count()
    }
}

impl Checker for NaiveChecker {
    fn count_errors(&self, text: &str, dialect: Dialect) -> Result<usize, CheckerError> {
        Ok(Self::doubled_words(text)
            + Self::lowercase_starts(text)
            + Self::doubled_spaces(text)
            + Self::dialect_spellings(text, dialect))
    }
}

/// The lower of the British and American error counts per character.
pub fn error_rate(text: &str, checker: &dyn Checker) -> Result<f64, CheckerError> {
    if text.is_empty() {
        return Ok(0.0);
    }
    let gb = checker.count_errors(text, Dialect::EnGb)?;
    let us = checker.count_errors(text, Dialect::EnUs)?;
    Ok(gb.min(us) as f64 / text.chars().count().max(1) as f64)
}

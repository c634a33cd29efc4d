use serde::{Deserialize, Serialize};

use crate::text::{is_greeting_line, is_sign_off_line, GREETINGS, SIGN_OFFS};

/// Lowercased whitespace tokens with punctuation removed; tokens that were
/// pure punctuation vanish.
pub fn lexical_words(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split_whitespace()
        .map(|w| {
            w.chars()
                .filter(|c| c.is_alphanumeric())
                .collect::<String>()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

/// Distinct adjacent word pairs divided by the number of words.
pub fn distinct2(text: &str) -> f64 {
    let words = lexical_words(text);
    if words.len() < 2 {
        return 0.0;
    }
    let mut pairs: Vec<(&str, &str)> = words
        .windows(2)
        .map(|w| (w[0].as_str(), w[1].as_str()))
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    pairs.len() as f64 / words.len() as f64
}

/// Levenshtein distance over Unicode scalar values.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StructureFlags {
    pub salutation_present: bool,
    pub closing_present: bool,
}

/// Lexicons for [`structure_flags_with`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructureLexicon {
    pub greetings: Vec<String>,
    pub sign_offs: Vec<String>,
}

impl Default for StructureLexicon {
    fn default() -> Self {
        Self {
            greetings: GREETINGS.iter().map(|s| s.to_string()).collect(),
            sign_offs: SIGN_OFFS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

pub fn structure_flags(text: &str) -> StructureFlags {
    structure_flags_with(text, &StructureLexicon::default())
}

/// Salutation: the first non-empty line opens with a greeting. Closing: one
/// of the last three non-empty lines is a sign-off, which leaves room for a
/// name line after it.
pub fn structure_flags_with(text: &str, lexicon: &StructureLexicon) -> StructureFlags {
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let salutation_present = lines
        .first()
        .is_some_and(|l| is_greeting_line(l, &lexicon.greetings));
    let closing_present = lines
        .iter()
        .rev()
        .take(3)
        .any(|l| is_sign_off_line(l, &lexicon.sign_offs));
    StructureFlags {
        salutation_present,
        closing_present,
    }
}

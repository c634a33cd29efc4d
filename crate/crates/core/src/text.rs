//! Small text helpers shared by the mock model, the scripted agents and the
//! email metrics.

pub const GREETINGS: &[&str] = &[
    "hi",
    "hello",
    "dear",
    "hey",
    "good morning",
    "good afternoon",
    "good evening",
];

pub const SIGN_OFFS: &[&str] = &[
    "best",
    "regards",
    "kind regards",
    "best regards",
    "warm regards",
    "sincerely",
    "thanks",
    "thank you",
    "many thanks",
    "cheers",
];

fn starts_with_word(line: &str, phrase: &str) -> bool {
    let lower = line.trim().to_lowercase();
    match lower.strip_prefix(phrase) {
        Some(rest) => rest.chars().next().is_none_or(|c| !c.is_alphanumeric()),
        None => false,
    }
}

/// The line opens with a greeting word ("Hi", "Dear", "Good morning", ...).
pub fn is_greeting_line(line: &str, lexicon: &[impl AsRef<str>]) -> bool {
    lexicon
        .iter()
        .any(|g| starts_with_word(line, &g.as_ref().to_lowercase()))
}

/// The line is a sign-off such as "Best," or "Kind regards".
///
/// Only short lines count, so "Thanks for the update, see you then." is
/// body text rather than a closing.
pub fn is_sign_off_line(line: &str, lexicon: &[impl AsRef<str>]) -> bool {
    let trimmed = line.trim().trim_end_matches([',', '.', '!']);
    if trimmed.split_whitespace().count() > 4 {
        return false;
    }
    lexicon.iter().any(|s| {
        let s = s.as_ref().to_lowercase();
        let lower = trimmed.to_lowercase();
        lower == s || (starts_with_word(&lower, &s) && lower.split_whitespace().count() <= 3)
    })
}

pub fn first_name(full_name: &str) -> &str {
    full_name.split_whitespace().next().unwrap_or(full_name)
}

pub fn capitalize_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

pub fn lowercase_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_lowercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Lowercased words with punctuation removed.
pub fn normalized_words(text: &str) -> Vec<String> {
    text.to_lowercase()
        .chars()
        .map(|c| {
            if c.is_alphanumeric() || c.is_whitespace() {
                c
            } else {
                ' '
            }
        })
        .collect::<String>()
        .split_whitespace()
        .map(str::to_owned)
        .collect()
}

//! Rule-based sentence segmentation for incoming email bodies.
//!
//! Sentences are addressed by byte offsets into the original body. Everything
//! between two spans is whitespace, so the body can always be rebuilt from the
//! spans and the recorded gaps.

use serde::{Deserialize, Serialize};

/// Abbreviations that never close a sentence, compared lowercased.
const NON_TERMINAL_ABBREVIATIONS: &[&str] = &[
    "dr.", "mr.", "mrs.", "ms.", "prof.", "st.", "e.g.", "i.e.", "vs.", "approx.", "cf.", "jr.",
    "sr.",
];

/// Abbreviations that close a sentence only when the next word is capitalized.
const AMBIGUOUS_ABBREVIATIONS: &[&str] = &[
    "a.m.", "p.m.", "etc.", "inc.", "ltd.", "co.", "jan.", "feb.", "mar.", "apr.", "jun.", "jul.",
    "aug.", "sep.", "sept.", "oct.", "nov.", "dec.",
];

const TERMINATORS: &[char] = &['.', '!', '?'];
const CLOSERS: &[char] = &['"', '\'', ')', ']', '\u{201d}', '\u{2019}', '\u{bb}'];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceSpan {
    pub index: usize,
    /// Byte offset of the first character.
    pub start: usize,
    /// Byte offset one past the last character.
    pub end: usize,
    pub text: String,
}

/// An email as presented on the reading screen.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IncomingEmail {
    pub id: String,
    pub sender_name: String,
    pub subject: String,
    pub body: String,
    pub sentences: Vec<SentenceSpan>,
    /// Whitespace runs around the spans; always `sentences.len() + 1` entries.
    pub gaps: Vec<String>,
}

impl IncomingEmail {
    pub fn new(
        id: impl Into<String>,
        sender_name: impl Into<String>,
        subject: impl Into<String>,
        body: impl Into<String>,
    ) -> Self {
        let body = body.into();
        let sentences = segment_email(&body);
        let gaps = gaps_between(&body, &sentences);
        Self {
            id: id.into(),
            sender_name: sender_name.into(),
            subject: subject.into(),
            body,
            sentences,
            gaps,
        }
    }

    pub fn sentence(&self, index: usize) -> Option<&SentenceSpan> {
        self.sentences.get(index)
    }

    pub fn word_count(&self) -> usize {
        self.body.split_whitespace().count()
    }
}

fn gaps_between(body: &str, spans: &[SentenceSpan]) -> Vec<String> {
    let mut gaps = Vec::with_capacity(spans.len() + 1);
    let mut cursor = 0;
    for span in spans {
        gaps.push(body[cursor..span.start].to_owned());
        cursor = span.end;
    }
    gaps.push(body[cursor..].to_owned());
    gaps
}

/// Rebuilds the body from spans and gaps without consulting `email.body`.
pub fn reconstruct(email: &IncomingEmail) -> String {
    let mut out = String::with_capacity(email.body.len());
    for (gap, span) in email.gaps.iter().zip(&email.sentences) {
        out.push_str(gap);
        out.push_str(&span.text);
    }
    if let Some(tail) = email.gaps.get(email.sentences.len()) {
        out.push_str(tail);
    }
    out
}

/// Splits `body` into sentence spans.
///
/// A span closes at a newline, or after a run of `.`, `!`, `?` (plus closing
/// quotes or brackets) that is followed by whitespace or the end of input.
/// A lone period ending a known abbreviation does not close the span.
pub fn segment_email(body: &str) -> Vec<SentenceSpan> {
    let chars: Vec<(usize, char)> = body.char_indices().collect();
    let mut spans = Vec::new();
    let mut start: Option<usize> = None;
    let mut token_start = 0;
    let mut last_end = 0;

    let push = |spans: &mut Vec<SentenceSpan>, s: usize, e: usize| {
        spans.push(SentenceSpan {
            index: spans.len(),
            start: s,
            end: e,
            text: body[s..e].to_owned(),
        });
    };

    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if c == '\n' {
            if let Some(s) = start.take() {
                push(&mut spans, s, last_end);
            }
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if start.is_none() {
            start = Some(pos);
        }
        if i == 0 || chars[i - 1].1.is_whitespace() {
            token_start = pos;
        }
        last_end = pos + c.len_utf8();

        if !TERMINATORS.contains(&c) {
            i += 1;
            continue;
        }

        // Consume the whole terminator run, then any closers.
        let mut j = i + 1;
        let mut terminator_count = 1;
        while j < chars.len() && TERMINATORS.contains(&chars[j].1) {
            terminator_count += 1;
            j += 1;
        }
        while j < chars.len() && CLOSERS.contains(&chars[j].1) {
            j += 1;
        }
        let at_break = j == chars.len() || chars[j].1.is_whitespace();
        if !at_break {
            i += 1;
            continue;
        }
        let run_end = if j == chars.len() {
            body.len()
        } else {
            chars[j].0
        };

        let closes = if c == '.' && terminator_count == 1 {
            let word = &body[token_start..pos + 1];
            !abbreviation_guard(word, next_word_start(&chars, j))
        } else {
            true
        };

        last_end = run_end;
        if closes {
            if let Some(s) = start.take() {
                push(&mut spans, s, last_end);
            }
        }
        i = j;
    }
    if let Some(s) = start {
        push(&mut spans, s, last_end);
    }
    spans
}

/// First character of the next word on the same line, if any.
fn next_word_start(chars: &[(usize, char)], from: usize) -> Option<char> {
    chars[from..]
        .iter()
        .map(|&(_, c)| c)
        .take_while(|&c| c != '\n')
        .find(|c| !c.is_whitespace())
}

/// True when the period ending `word` belongs to an abbreviation and should
/// not close the sentence.
fn abbreviation_guard(word: &str, next: Option<char>) -> bool {
    let word = word
        .trim_start_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase();
    if NON_TERMINAL_ABBREVIATIONS.contains(&word.as_str()) {
        return true;
    }
    if AMBIGUOUS_ABBREVIATIONS.contains(&word.as_str()) {
        return !matches!(next, Some(c) if c.is_uppercase());
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(body: &str) -> Vec<String> {
        segment_email(body).into_iter().map(|s| s.text).collect()
    }

    #[test]
    fn splits_on_unambiguous_terminators() {
        assert_eq!(
            texts("Hi Tom. How are you? See you soon!"),
            ["Hi Tom.", "How are you?", "See you soon!"]
        );
    }

    #[test]
    fn empty_body_has_no_spans() {
        assert!(segment_email("").is_empty());
        assert!(segment_email("  \n\t ").is_empty());
    }

    #[test]
    fn abbreviations_do_not_split() {
        assert_eq!(
            texts("We met Dr. Smith at 5 p.m. yesterday. It was fun."),
            ["We met Dr. Smith at 5 p.m. yesterday.", "It was fun."]
        );
    }

    #[test]
    fn ambiguous_abbreviation_splits_before_capital() {
        assert_eq!(
            texts("Due at 5 p.m. Please hurry."),
            ["Due at 5 p.m.", "Please hurry."]
        );
    }

    #[test]
    fn newline_closes_unpunctuated_lines() {
        assert_eq!(
            texts("Hi Jamie,\n\nSee you.\n\nBest,\nPriya"),
            ["Hi Jamie,", "See you.", "Best,", "Priya"]
        );
    }

    #[test]
    fn decimals_and_inner_periods_stay_inside() {
        assert_eq!(
            texts("Version 3.5 is out. Yay"),
            ["Version 3.5 is out.", "Yay"]
        );
    }

    #[test]
    fn span_offsets_address_the_body() {
        let body = "  Über alles. Ça va?\r\nOui ";
        for (k, span) in segment_email(body).iter().enumerate() {
            assert_eq!(span.index, k);
            assert!(span.start < span.end);
            assert_eq!(&body[span.start..span.end], span.text);
        }
    }

    #[test]
    fn reconstruct_round_trips() {
        for body in ["Hi Tom. Bye.", "", "\n\nx\n", " a.  b! c? \u{3000}d"] {
            let email = IncomingEmail::new("id", "s", "subj", body);
            assert_eq!(reconstruct(&email), body);
        }
    }
}

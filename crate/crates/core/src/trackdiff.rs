//! Word-level track-changes diff between a draft and its improved version.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffKind {
    Equal,
    Insert,
    Delete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffOp {
    pub kind: DiffKind,
    pub tokens: Vec<String>,
}

impl DiffOp {
    pub fn text(&self) -> String {
        self.tokens.concat()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mark {
    None,
    Inserted,
    Deleted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedSegment {
    pub text: String,
    pub mark: Mark,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiffError {
    #[error("diff ops do not match the base text at byte {0}")]
    InconsistentOps(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalStatus {
    Pending,
    Accepted,
    Discarded,
}

/// An improvement-pass result awaiting the user's decision.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImprovementProposal {
    pub base_draft: String,
    pub improved_text: String,
    pub ops: Vec<DiffOp>,
    pub status: ProposalStatus,
}

impl ImprovementProposal {
    pub fn new(base_draft: impl Into<String>, improved_text: impl Into<String>) -> Self {
        let base_draft = base_draft.into();
        let improved_text = improved_text.into();
        let ops = word_diff(&base_draft, &improved_text);
        Self {
            base_draft,
            improved_text,
            ops,
            status: ProposalStatus::Pending,
        }
    }

    pub fn annotations(&self) -> Vec<AnnotatedSegment> {
        render_annotations(&self.ops)
    }
}

/// Splits text into alternating runs of whitespace and non-whitespace.
pub fn tokenize(text: &str) -> Vec<&str> {
    let mut tokens = Vec::new();
    let mut start = 0;
    let mut in_space: Option<bool> = None;
    for (i, c) in text.char_indices() {
        let space = c.is_whitespace();
        if in_space.is_some_and(|s| s != space) {
            tokens.push(&text[start..i]);
            start = i;
        }
        in_space = Some(space);
    }
    if start < text.len() {
        tokens.push(&text[start..]);
    }
    tokens
}

/// Token-level edit script from `old` to `new` (Myers' O(ND) algorithm).
///
/// Adjacent ops of the same kind are merged, and within a changed region the
/// deletion precedes the insertion.
pub fn word_diff(old: &str, new: &str) -> Vec<DiffOp> {
    let a = tokenize(old);
    let b = tokenize(new);

    let prefix = a.iter().zip(&b).take_while(|(x, y)| x == y).count();
    let suffix = a[prefix..]
        .iter()
        .rev()
        .zip(b[prefix..].iter().rev())
        .take_while(|(x, y)| x == y)
        .count();

    let mut raw: Vec<(DiffKind, &str)> = Vec::with_capacity(a.len() + b.len());
    raw.extend(a[..prefix].iter().map(|t| (DiffKind::Equal, *t)));
    myers(
        &a[prefix..a.len() - suffix],
        &b[prefix..b.len() - suffix],
        &mut raw,
    );
    raw.extend(a[a.len() - suffix..].iter().map(|t| (DiffKind::Equal, *t)));

    coalesce(raw)
}

fn myers<'a>(a: &[&'a str], b: &[&'a str], out: &mut Vec<(DiffKind, &'a str)>) {
    let n = a.len() as isize;
    let m = b.len() as isize;
    if n == 0 {
        out.extend(b.iter().map(|t| (DiffKind::Insert, *t)));
        return;
    }
    if m == 0 {
        out.extend(a.iter().map(|t| (DiffKind::Delete, *t)));
        return;
    }

    let max = (n + m) as usize;
    let offset = max as isize;
    let mut v = vec![0isize; 2 * max + 2];
    let mut trace: Vec<Vec<isize>> = Vec::new();

    'outer: for d in 0..=max as isize {
        trace.push(v.clone());
        let mut k = -d;
        while k <= d {
            let idx = (k + offset) as usize;
            let mut x = if k == -d || (k != d && v[idx - 1] < v[idx + 1]) {
                v[idx + 1]
            } else {
                v[idx - 1] + 1
            };
            let mut y = x - k;
            while x < n && y < m && a[x as usize] == b[y as usize] {
                x += 1;
                y += 1;
            }
            v[idx] = x;
            if x >= n && y >= m {
                break 'outer;
            }
            k += 2;
        }
    }

    // Walk the trace backwards to recover the path.
    let mut script = Vec::with_capacity((n + m) as usize);
    let (mut x, mut y) = (n, m);
    for (d, v) in trace.iter().enumerate().rev() {
        let d = d as isize;
        let k = x - y;
        let at = |k: isize| v[(k + offset) as usize];
        let prev_k = if k == -d || (k != d && at(k - 1) < at(k + 1)) {
            k + 1
        } else {
            k - 1
        };
        let prev_x = at(prev_k);
        let prev_y = prev_x - prev_k;
        while x > prev_x && y > prev_y {
            script.push((DiffKind::Equal, a[(x - 1) as usize]));
            x -= 1;
            y -= 1;
        }
        if d > 0 {
            if x == prev_x {
                script.push((DiffKind::Insert, b[prev_y as usize]));
            } else {
                script.push((DiffKind::Delete, a[prev_x as usize]));
            }
        }
        x = prev_x;
        y = prev_y;
    }
    script.reverse();
    out.extend(script);
}

/// Merges runs and orders deletions before insertions inside each change.
fn coalesce(raw: Vec<(DiffKind, &str)>) -> Vec<DiffOp> {
    let mut ops: Vec<DiffOp> = Vec::new();
    let mut pending_delete: Vec<String> = Vec::new();
    let mut pending_insert: Vec<String> = Vec::new();

    let flush = |ops: &mut Vec<DiffOp>, del: &mut Vec<String>, ins: &mut Vec<String>| {
        if !del.is_empty() {
            ops.push(DiffOp {
                kind: DiffKind::Delete,
                tokens: std::mem::take(del),
            });
        }
        if !ins.is_empty() {
            ops.push(DiffOp {
                kind: DiffKind::Insert,
                tokens: std::mem::take(ins),
            });
        }
    };

    for (kind, token) in raw {
        match kind {
            DiffKind::Delete => pending_delete.push(token.to_owned()),
            DiffKind::Insert => pending_insert.push(token.to_owned()),
            DiffKind::Equal => {
                flush(&mut ops, &mut pending_delete, &mut pending_insert);
                match ops.last_mut() {
                    Some(op) if op.kind == DiffKind::Equal => op.tokens.push(token.to_owned()),
                    _ => ops.push(DiffOp {
                        kind: DiffKind::Equal,
                        tokens: vec![token.to_owned()],
                    }),
                }
            }
        }
    }
    flush(&mut ops, &mut pending_delete, &mut pending_insert);
    ops
}

/// Replays `ops` against `old`, checking every equal and deleted token.
pub fn apply_diff(old: &str, ops: &[DiffOp]) -> Result<String, DiffError> {
    let mut out = String::with_capacity(old.len());
    let mut cursor = 0;
    for op in ops {
        for token in &op.tokens {
            match op.kind {
                DiffKind::Insert => out.push_str(token),
                DiffKind::Equal | DiffKind::Delete => {
                    if !old[cursor..].starts_with(token.as_str()) {
                        return Err(DiffError::InconsistentOps(cursor));
                    }
                    if op.kind == DiffKind::Equal {
                        out.push_str(token);
                    }
                    cursor += token.len();
                }
            }
        }
    }
    if cursor != old.len() {
        return Err(DiffError::InconsistentOps(cursor));
    }
    Ok(out)
}

/// Flattens ops into display segments in new-text order, with deletions
/// shown where they happened.
pub fn render_annotations(ops: &[DiffOp]) -> Vec<AnnotatedSegment> {
    let mut segments: Vec<AnnotatedSegment> = Vec::new();
    for op in ops {
        let mark = match op.kind {
            DiffKind::Equal => Mark::None,
            DiffKind::Insert => Mark::Inserted,
            DiffKind::Delete => Mark::Deleted,
        };
        let text = op.text();
        if text.is_empty() {
            continue;
        }
        match segments.last_mut() {
            Some(last) if last.mark == mark => last.text.push_str(&text),
            _ => segments.push(AnnotatedSegment { text, mark }),
        }
    }
    segments
}

/// Text the segments represent before the change.
pub fn annotated_old(segments: &[AnnotatedSegment]) -> String {
    segments
        .iter()
        .filter(|s| s.mark != Mark::Inserted)
        .map(|s| s.text.as_str())
        .collect()
}

/// Text the segments represent after the change.
pub fn annotated_new(segments: &[AnnotatedSegment]) -> String {
    segments
        .iter()
        .filter(|s| s.mark != Mark::Deleted)
        .map(|s| s.text.as_str())
        .collect()
}

/// Number of inserted plus deleted tokens.
pub fn edit_weight(ops: &[DiffOp]) -> usize {
    ops.iter()
        .filter(|op| op.kind != DiffKind::Equal)
        .map(|op| op.tokens.len())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn op(kind: DiffKind, tokens: &[&str]) -> DiffOp {
        DiffOp {
            kind,
            tokens: tokens.iter().map(|t| t.to_string()).collect(),
        }
    }

    #[test]
    fn single_substitution() {
        let ops = word_diff("a b c", "a x c");
        assert_eq!(
            ops,
            vec![
                op(DiffKind::Equal, &["a", " "]),
                op(DiffKind::Delete, &["b"]),
                op(DiffKind::Insert, &["x"]),
                op(DiffKind::Equal, &[" ", "c"]),
            ]
        );
        assert_eq!(edit_weight(&ops), 2);
        assert_eq!(apply_diff("a b c", &ops).unwrap(), "a x c");
    }

    #[test]
    fn identity_is_one_equal_op() {
        let s = "Hello there,  friend!\n";
        let ops = word_diff(s, s);
        assert_eq!(ops.len(), 1);
        assert_eq!(ops[0].kind, DiffKind::Equal);
        assert_eq!(ops[0].text(), s);
        assert_eq!(
            render_annotations(&ops),
            vec![AnnotatedSegment {
                text: s.into(),
                mark: Mark::None
            }]
        );
    }

    #[test]
    fn empty_inputs() {
        assert!(word_diff("", "").is_empty());
        assert_eq!(apply_diff("", &word_diff("", "x y")).unwrap(), "x y");
        assert_eq!(apply_diff("x y", &word_diff("x y", "")).unwrap(), "");
    }

    #[test]
    fn apply_identity() {
        assert_eq!(
            apply_diff("x", &[op(DiffKind::Equal, &["x"])]).unwrap(),
            "x"
        );
    }

    #[test]
    fn corrupted_ops_are_rejected() {
        let ops = vec![op(DiffKind::Equal, &["y"])];
        assert_eq!(apply_diff("x", &ops), Err(DiffError::InconsistentOps(0)));
        let short = vec![op(DiffKind::Equal, &["a"])];
        assert_eq!(
            apply_diff("a b", &short),
            Err(DiffError::InconsistentOps(1))
        );
    }

    #[test]
    fn annotation_of_append() {
        let segs = render_annotations(&word_diff("hi", "hi there"));
        assert_eq!(
            segs,
            vec![
                AnnotatedSegment {
                    text: "hi".into(),
                    mark: Mark::None
                },
                AnnotatedSegment {
                    text: " there".into(),
                    mark: Mark::Inserted
                },
            ]
        );
    }

    #[test]
    fn annotation_of_truncation() {
        let segs = render_annotations(&word_diff("a b", "a"));
        assert_eq!(
            segs,
            vec![
                AnnotatedSegment {
                    text: "a".into(),
                    mark: Mark::None
                },
                AnnotatedSegment {
                    text: " b".into(),
                    mark: Mark::Deleted
                },
            ]
        );
    }

    #[test]
    fn tokenizer_keeps_separators() {
        assert_eq!(tokenize(" ab  c\nd"), [" ", "ab", "  ", "c", "\n", "d"]);
        assert_eq!(tokenize("").len(), 0);
    }

    #[test]
    fn proposal_builds_ops() {
        let p = ImprovementProposal::new("ok 2pm", "Hi,\n\nOK, 2pm works.");
        assert_eq!(p.status, ProposalStatus::Pending);
        assert_eq!(apply_diff(&p.base_draft, &p.ops).unwrap(), p.improved_text);
    }
}

use std::path::PathBuf;

use cdlr_server::corpus::WORD_RANGE;
use cdlr_server::{load_corpus, CorpusError};

fn shipped() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

#[test]
fn shipped_corpus_has_nine_emails_in_range() {
    let corpus = load_corpus(&shipped(), true).unwrap();
    assert_eq!(corpus.len(), 9);
    let mut counts: Vec<usize> = corpus.iter().map(|e| e.email().word_count()).collect();
    assert!(counts.iter().all(|c| WORD_RANGE.contains(c)), "{counts:?}");
    counts.sort();
    assert_eq!(counts[0], 24);
    assert_eq!(counts[4], 57);
    assert_eq!(counts[8], 155);
}

#[test]
fn array_file_loads_and_size_is_checked() {
    let corpus = load_corpus(&shipped(), true).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("all.json");
    std::fs::write(&path, serde_json::to_string(&corpus).unwrap()).unwrap();
    assert_eq!(load_corpus(&path, true).unwrap(), corpus);

    std::fs::write(&path, serde_json::to_string(&corpus[..8]).unwrap()).unwrap();
    assert!(matches!(
        load_corpus(&path, true),
        Err(CorpusError::CorpusSizeMismatch {
            found: 8,
            expected: 9
        })
    ));
    assert_eq!(load_corpus(&path, false).unwrap().len(), 8);
}

#[test]
fn missing_briefing_is_invalid() {
    let corpus = load_corpus(&shipped(), true).unwrap();
    let mut value = serde_json::to_value(&corpus).unwrap();
    value[3].as_object_mut().unwrap().remove("briefing_text");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("all.json");
    std::fs::write(&path, value.to_string()).unwrap();
    assert!(matches!(
        load_corpus(&path, true),
        Err(CorpusError::CorpusInvalid(_))
    ));
}

#[test]
fn duplicate_ids_and_short_bodies_are_invalid() {
    let mut corpus = load_corpus(&shipped(), true).unwrap();
    corpus[1].id = corpus[0].id.clone();
    assert!(matches!(
        cdlr_server::corpus::validate(&corpus, true),
        Err(CorpusError::CorpusInvalid(m)) if m.contains("duplicate")
    ));
    let mut corpus = load_corpus(&shipped(), true).unwrap();
    corpus[2].body = "Hi Jamie,\n\nToo short.\n\nBest,\nAl".into();
    assert!(cdlr_server::corpus::validate(&corpus, true).is_err());
}

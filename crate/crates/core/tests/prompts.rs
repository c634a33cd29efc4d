//! Rendered prompts are compared against checked-in transcripts. Set
//! `UPDATE_GOLDEN=1` to rewrite them after an intended template change.

use std::path::PathBuf;

use cdlr_core::prompting::{
    render_prompt, Attribute, PromptError, PromptTemplate, PromptVariables, TemplateId,
};

fn vars(existing: &str) -> PromptVariables {
    PromptVariables {
        sender: Some("Lena Fischer".into()),
        email_text: Some(
            "Hi Jamie,\nAre you free for lunch on Thursday? The new place opened.\nLena".into(),
        ),
        existing_reply: Some(existing.into()),
        attribute: Some(Attribute::Declining),
        referenced_text: Some("Are you free for lunch on Thursday?".into()),
        input: Some("busy until 2, maybe Friday".into()),
    }
}

fn check_golden(name: &str, actual: &str) {
    let path =
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("tests/golden/prompts/{name}.txt"));
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("{}: {e}; run with UPDATE_GOLDEN=1", path.display()));
    assert_eq!(
        actual, expected,
        "{name} drifted from its golden transcript"
    );
}

#[test]
fn every_template_matches_its_golden_transcript() {
    for id in TemplateId::ALL {
        check_golden(
            id.as_str(),
            &render_prompt(id, &vars("")).unwrap().to_text(),
        );
    }
    check_golden(
        "sentence_no_input_with_reply",
        &render_prompt(TemplateId::SentenceNoInput, &vars("Thanks for asking."))
            .unwrap()
            .to_text(),
    );
}

#[test]
fn user_turn_ends_with_the_final_instruction() {
    for id in TemplateId::ALL {
        let p = render_prompt(id, &vars("Sounds good.")).unwrap();
        let tail = PromptTemplate::get(id).final_instruction();
        assert!(p.user.ends_with(tail), "{id}: {:?}", p.user);
        assert!(!p.examples.is_empty(), "{id} has no few-shot examples");
    }
}

#[test]
fn missing_variables_are_reported_not_blanked() {
    for id in TemplateId::ALL {
        let err = render_prompt(id, &PromptVariables::default()).unwrap_err();
        assert!(
            matches!(err, PromptError::MissingVariable(_)),
            "{id}: {err}"
        );
    }
}

#[test]
fn template_ids_round_trip_through_names() {
    for id in TemplateId::ALL {
        assert_eq!(id.as_str().parse::<TemplateId>().unwrap(), id);
    }
    assert!("sentence".parse::<TemplateId>().is_err());
}

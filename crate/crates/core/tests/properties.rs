use cdlr_core::sim::{apply_action, random_script};
use cdlr_core::trackdiff::{
    annotated_new, annotated_old, apply_diff, render_annotations, word_diff,
};
use cdlr_core::{
    read_log, reconstruct, segment_email, GenerationOptions, IncomingEmail, ManualClock,
    MockClient, Session, SessionLog, SessionState, UiMode,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const BODY: &str = "Hi Jamie,\n\nCould you send the slides by Friday? Dr. Okafor asked for them at 3 p.m. on the day.\nAlso, are you joining the offsite!\n\nThanks,\nMara";

fn text() -> impl Strategy<Value = String> {
    proptest::string::string_regex("([A-Za-zé.!?,]{1,6}( |\n|  |\t)?){0,30}").unwrap()
}

proptest! {
    #[test]
    fn segmentation_reconstructs_input(body in text()) {
        let email = IncomingEmail::new("p", "P", "s", body.as_str());
        prop_assert_eq!(reconstruct(&email), body.clone());
        for span in segment_email(&body) {
            prop_assert_eq!(&body[span.start..span.end], span.text.as_str());
            prop_assert!(!span.text.contains('\n'));
        }
    }

    #[test]
    fn word_diff_applies_and_annotates(old in text(), new in text()) {
        let ops = word_diff(&old, &new);
        prop_assert_eq!(apply_diff(&old, &ops).unwrap(), new.clone());
        let segments = render_annotations(&ops);
        prop_assert_eq!(annotated_old(&segments), old);
        prop_assert_eq!(annotated_new(&segments), new);
    }

    #[test]
    fn identical_texts_diff_to_no_changes(old in text()) {
        let segments = render_annotations(&word_diff(&old, &old));
        prop_assert_eq!(annotated_new(&segments), old);
    }
}

fn random_session(mode: UiMode, seed: u64) -> Session {
    let email = IncomingEmail::new("e", "Mara", "slides", BODY);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clock = ManualClock::new();
    let mut session = Session::start(&email, mode, "b", seed, Box::new(clock.clone()))
        .with_options(GenerationOptions {
            concurrent: false,
            ..GenerationOptions::default()
        });
    for action in random_script(&mut rng, mode, email.sentences.len(), 60) {
        clock.advance(50);
        let _ = apply_action(&mut session, &action, &MockClient::new());
        session.state().check_invariants().unwrap();
    }
    session
}

#[test]
fn event_replay_reproduces_live_state() {
    for mode in UiMode::ALL {
        for seed in 0..40 {
            let session = random_session(mode, seed);
            let replayed = SessionState::replay(session.events()).unwrap();
            assert_eq!(&replayed, session.state(), "{mode} seed {seed}");
        }
    }
}

/// A crash can cut the log after any line; every prefix must still replay
/// to a consistent state.
#[test]
fn every_log_prefix_replays() {
    for mode in UiMode::ALL {
        for seed in 0..10 {
            let session = random_session(mode, seed);
            let text = SessionLog {
                header: None,
                events: session.events().to_vec(),
            }
            .to_jsonl();
            let lines: Vec<&str> = text.lines().collect();
            for cut in 1..=lines.len() {
                let log = read_log(&lines[..cut].join("\n")).unwrap();
                let state = SessionState::replay(&log.events)
                    .unwrap_or_else(|e| panic!("{mode} seed {seed} cut {cut}: {e}"));
                state.check_invariants().unwrap();
            }
        }
    }
}

#[test]
fn a_torn_last_line_is_reported_with_its_line_number() {
    let session = random_session(UiMode::Cdlr, 3);
    let text = SessionLog {
        header: None,
        events: session.events().to_vec(),
    }
    .to_jsonl();
    let n = text.lines().count();
    let torn = &text[..text.trim_end().len() - 5];
    let err = read_log(torn).unwrap_err().to_string();
    assert!(err.starts_with(&format!("line {n}:")), "{err}");
}

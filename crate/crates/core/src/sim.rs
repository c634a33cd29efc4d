//! Scripted drivers: a serializable action vocabulary shared by the direct
//! and HTTP drivers, random action streams, and three fixed agent policies.

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::prompting::LlmClient;
use crate::session::{
    run_suggestions, ManualClock, ProposalDecision, Session, SessionError, UiMode,
};
use crate::study::{CorpusEntry, LikertItem, LikertResponse};
use crate::text::{
    capitalize_first, first_name, is_greeting_line, is_sign_off_line, GREETINGS, SIGN_OFFS,
};

/// One user gesture. Actions that open or change a widget also wait for its
/// suggestion set, so a script produces the same log whichever driver runs it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    Select {
        anchor: usize,
    },
    Type {
        anchor: usize,
        text: String,
    },
    Page {
        anchor: usize,
        page: usize,
    },
    /// Accepts the suggestion at `rank` in page order.
    Accept {
        anchor: usize,
        rank: usize,
    },
    Collapse {
        anchor: usize,
    },
    Delete {
        anchor: usize,
    },
    Finalize,
    Proceed,
    EditDraft {
        text: String,
    },
    Improve,
    Resolve {
        decision: ProposalDecision,
    },
    MsgPrompt {
        text: String,
    },
    MsgGenerate,
    MsgResolve {
        decision: ProposalDecision,
    },
    Send,
    Feedback {
        rating: u8,
        comment: Option<String>,
    },
    Briefing,
}

/// Suggestion id at `rank` in page order, if the widget has a current set.
pub fn ranked_suggestion(session: &Session, anchor: usize, rank: usize) -> Option<String> {
    let set = session.state().widget(anchor)?.current_set()?;
    set.pages.iter().flatten().nth(rank).cloned()
}

pub fn likert(rating: u8) -> Vec<LikertResponse> {
    LikertItem::ALL
        .iter()
        .map(|&item| LikertResponse { item, rating })
        .collect()
}

fn generate_and_deliver(
    session: &mut Session,
    request: Option<crate::suggestions::SuggestionRequest>,
    client: &dyn LlmClient,
) -> Result<(), SessionError> {
    if let Some(req) = request {
        let set = run_suggestions(&session.state().email, &req, client, session.options())?;
        session.deliver_suggestions(req.anchor, set)?;
    }
    Ok(())
}

/// Runs one action against a session directly.
pub fn apply_action(
    session: &mut Session,
    action: &Action,
    client: &dyn LlmClient,
) -> Result<(), SessionError> {
    match action {
        Action::Select { anchor } => {
            let req = session.select_sentence(*anchor)?;
            generate_and_deliver(session, req, client)
        }
        Action::Type { anchor, text } => {
            let req = session.set_widget_text(*anchor, text)?;
            generate_and_deliver(session, req, client)
        }
        Action::Page { anchor, page } => session.change_page(*anchor, *page),
        Action::Accept { anchor, rank } => {
            let id = ranked_suggestion(session, *anchor, *rank).unwrap_or_default();
            session.accept_suggestion(*anchor, &id)
        }
        Action::Collapse { anchor } => session.collapse_widget(*anchor),
        Action::Delete { anchor } => session.delete_widget(*anchor),
        Action::Finalize => session.finalize(),
        Action::Proceed => session.proceed(),
        Action::EditDraft { text } => session.edit_draft(text),
        Action::Improve => session.request_improvement(client).map(|_| ()),
        Action::Resolve { decision } => session.resolve_proposal(*decision),
        Action::MsgPrompt { text } => session.msg_set_prompt(text),
        Action::MsgGenerate => session.msg_generate(client).map(|_| ()),
        Action::MsgResolve { decision } => session.msg_resolve(*decision),
        Action::Send => session.send().map(|_| ()),
        Action::Feedback { rating, comment } => {
            session.record_feedback(likert(*rating), comment.as_deref())
        }
        Action::Briefing => session.view_briefing(),
    }
}

const WORDS: &[&str] = &[
    "yes", "no", "maybe", "thursday", "works", "sorry", "the", "budget", "is", "fine", "i", "can",
    "not", "join", "thanks", "balloon", "ride", "later", "ok", "great",
];

fn random_text<R: Rng>(rng: &mut R, max_words: usize) -> String {
    let n = rng.random_range(0..=max_words);
    (0..n)
        .map(|_| *WORDS.choose(rng).expect("non-empty"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// A random action stream biased towards actions the mode supports. Invalid
/// actions are included on purpose; drivers must reject them identically.
pub fn random_script<R: Rng>(
    rng: &mut R,
    mode: UiMode,
    sentence_count: usize,
    len: usize,
) -> Vec<Action> {
    let anchor = |rng: &mut R| rng.random_range(0..sentence_count.max(1) + 1);
    let decision = |rng: &mut R| {
        if rng.random_bool(0.5) {
            ProposalDecision::Accept
        } else {
            ProposalDecision::Discard
        }
    };
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        let roll = rng.random_range(0..100);
        let action = match mode {
            UiMode::Cdlr => match roll {
                0..=17 => Action::Select {
                    anchor: anchor(rng),
                },
                18..=29 => Action::Type {
                    anchor: anchor(rng),
                    text: random_text(rng, 4),
                },
                30..=39 => Action::Accept {
                    anchor: anchor(rng),
                    rank: rng.random_range(0..7),
                },
                40..=43 => Action::Page {
                    anchor: anchor(rng),
                    page: rng.random_range(0..4),
                },
                44..=47 => Action::Collapse {
                    anchor: anchor(rng),
                },
                48..=51 => Action::Delete {
                    anchor: anchor(rng),
                },
                52..=57 => Action::Finalize,
                58..=67 => Action::Improve,
                68..=79 => Action::Resolve {
                    decision: decision(rng),
                },
                80..=89 => Action::EditDraft {
                    text: random_text(rng, 8),
                },
                90..=92 => Action::Briefing,
                93..=95 => Action::MsgGenerate,
                _ => Action::Send,
            },
            UiMode::Msg => match roll {
                0..=14 => Action::Proceed,
                15..=34 => Action::MsgPrompt {
                    text: random_text(rng, 5),
                },
                35..=54 => Action::MsgGenerate,
                55..=69 => Action::MsgResolve {
                    decision: decision(rng),
                },
                70..=82 => Action::EditDraft {
                    text: random_text(rng, 8),
                },
                83..=86 => Action::Improve,
                87..=89 => Action::Select {
                    anchor: anchor(rng),
                },
                90..=92 => Action::Briefing,
                _ => Action::Send,
            },
            UiMode::NoAi => match roll {
                0..=19 => Action::Proceed,
                20..=59 => Action::EditDraft {
                    text: random_text(rng, 10),
                },
                60..=64 => Action::Improve,
                65..=69 => Action::Select {
                    anchor: anchor(rng),
                },
                70..=72 => Action::MsgGenerate,
                73..=79 => Action::Briefing,
                _ => Action::Send,
            },
        };
        out.push(action);
    }
    if rng.random_bool(0.5) {
        out.push(Action::Feedback {
            rating: rng.random_range(0..7),
            comment: rng.random_bool(0.5).then(|| random_text(rng, 5)),
        });
    }
    out
}

/// The three scripted user policies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentPolicy {
    /// NOAI: types the whole reply by hand.
    TypeEverything,
    /// CDLR: answers a few sentences with suggestions, then improves.
    AcceptFirstThenImprove,
    /// MSG: types one fact as the prompt and accepts the first generation.
    GenerateAccept,
}

impl AgentPolicy {
    pub const ALL: [AgentPolicy; 3] = [
        AgentPolicy::TypeEverything,
        AgentPolicy::AcceptFirstThenImprove,
        AgentPolicy::GenerateAccept,
    ];

    pub fn for_mode(mode: UiMode) -> AgentPolicy {
        match mode {
            UiMode::NoAi => AgentPolicy::TypeEverything,
            UiMode::Cdlr => AgentPolicy::AcceptFirstThenImprove,
            UiMode::Msg => AgentPolicy::GenerateAccept,
        }
    }

    pub fn mode(self) -> UiMode {
        match self {
            AgentPolicy::TypeEverything => UiMode::NoAi,
            AgentPolicy::AcceptFirstThenImprove => UiMode::Cdlr,
            AgentPolicy::GenerateAccept => UiMode::Msg,
        }
    }
}

/// Sentences worth answering: not a greeting, sign-off or bare name line.
pub fn content_sentences(entry: &CorpusEntry) -> Vec<usize> {
    let email = entry.email();
    email
        .sentences
        .iter()
        .filter(|s| {
            !is_greeting_line(&s.text, GREETINGS)
                && !is_sign_off_line(&s.text, SIGN_OFFS)
                && s.text.split_whitespace().count() >= 4
        })
        .map(|s| s.index)
        .collect()
}

/// The reply a NOAI agent types: greeting, one sentence per key fact,
/// sign-off.
pub fn manual_reply(entry: &CorpusEntry) -> String {
    let facts: Vec<String> = entry
        .key_facts
        .iter()
        .map(|f| format!("{}.", capitalize_first(f.trim())))
        .collect();
    format!(
        "Hi {},\n\n{}\n\nBest,\nJamie",
        first_name(&entry.sender_name),
        facts.join(" ")
    )
}

// Simulated time costs in milliseconds.
const READ_MS_PER_WORD: u64 = 250;
const KEY_MS: u64 = 220;
const TAP_MS: u64 = 1_200;
const WAIT_MS: u64 = 2_500;

/// Actions an agent performs, with the simulated think time before each.
pub fn agent_script(policy: AgentPolicy, entry: &CorpusEntry) -> Vec<(u64, Action)> {
    let read = entry.body.split_whitespace().count() as u64 * READ_MS_PER_WORD;
    let typing = |s: &str| s.chars().count() as u64 * KEY_MS;
    let mut script = Vec::new();
    match policy {
        AgentPolicy::TypeEverything => {
            let text = manual_reply(entry);
            script.push((read, Action::Proceed));
            script.push((typing(&text), Action::EditDraft { text }));
        }
        AgentPolicy::AcceptFirstThenImprove => {
            let mut facts = entry.key_facts.iter();
            for (k, anchor) in content_sentences(entry).into_iter().take(3).enumerate() {
                let wait = if k == 0 { read } else { TAP_MS };
                script.push((wait, Action::Select { anchor }));
                if k < 2 {
                    if let Some(fact) = facts.next() {
                        script.push((
                            typing(fact) + WAIT_MS,
                            Action::Type {
                                anchor,
                                text: fact.clone(),
                            },
                        ));
                    }
                }
                script.push((WAIT_MS, Action::Accept { anchor, rank: 0 }));
            }
            script.push((TAP_MS, Action::Finalize));
            script.push((TAP_MS, Action::Improve));
            script.push((
                WAIT_MS,
                Action::Resolve {
                    decision: ProposalDecision::Accept,
                },
            ));
        }
        AgentPolicy::GenerateAccept => {
            script.push((read, Action::Proceed));
            if let Some(fact) = entry.key_facts.first() {
                script.push((typing(fact), Action::MsgPrompt { text: fact.clone() }));
            }
            script.push((TAP_MS, Action::MsgGenerate));
            script.push((
                WAIT_MS,
                Action::MsgResolve {
                    decision: ProposalDecision::Accept,
                },
            ));
        }
    }
    script.push((TAP_MS, Action::Send));
    script.push((
        TAP_MS,
        Action::Feedback {
            rating: 4,
            comment: None,
        },
    ));
    script
}

/// Runs an agent from session start to submitted feedback on a manual clock.
pub fn run_agent(
    policy: AgentPolicy,
    entry: &CorpusEntry,
    client: &dyn LlmClient,
    seed: u64,
) -> Result<Session, SessionError> {
    let clock = ManualClock::new();
    let mut session = Session::start(
        &entry.email(),
        policy.mode(),
        entry.briefing_id(),
        seed,
        Box::new(clock.clone()),
    );
    for (wait, action) in agent_script(policy, entry) {
        clock.advance(wait);
        apply_action(&mut session, &action, client)?;
    }
    Ok(session)
}

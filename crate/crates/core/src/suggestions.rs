//! Sentence-level suggestion sets, the improvement pass and message-level
//! reply generation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompting::{
    render_prompt, Attribute, LlmClient, LlmError, LlmRequest, PromptError, PromptVariables,
    SamplingConfig, TemplateId,
};
use crate::segmenter::{IncomingEmail, SentenceSpan};

pub const SET_SIZE: usize = 6;
pub const PAGE_SIZE: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuggestionAttribute {
    Accepting,
    Declining,
    Neutral,
    Unlabeled,
}

impl From<Attribute> for SuggestionAttribute {
    fn from(a: Attribute) -> Self {
        match a {
            Attribute::Accepting => SuggestionAttribute::Accepting,
            Attribute::Declining => SuggestionAttribute::Declining,
            Attribute::Neutral => SuggestionAttribute::Neutral,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuggestionSource {
    NoInput,
    WithInput,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suggestion {
    pub id: String,
    pub text: String,
    pub attribute: SuggestionAttribute,
    pub source: SuggestionSource,
}

/// Up to six suggestions arranged into pages of two.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuggestionSet {
    pub token: u64,
    pub source: SuggestionSource,
    pub suggestions: Vec<Suggestion>,
    /// Suggestion ids per page, in display order.
    pub pages: Vec<Vec<String>>,
    /// Set when some generations failed and fewer than six came back.
    pub degraded: bool,
}

impl SuggestionSet {
    pub fn get(&self, id: &str) -> Option<&Suggestion> {
        self.suggestions.iter().find(|s| s.id == id)
    }

    /// 1-based page holding `id`.
    pub fn page_of(&self, id: &str) -> Option<usize> {
        self.pages
            .iter()
            .position(|p| p.iter().any(|x| x == id))
            .map(|p| p + 1)
    }

    /// Checks the structural invariants, returning a description of the
    /// first violation.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut seen = std::collections::HashSet::new();
        for page in &self.pages {
            if page.is_empty() || page.len() > PAGE_SIZE {
                return Err(format!("page of size {}", page.len()));
            }
            for id in page {
                if self.get(id).is_none() {
                    return Err(format!("page lists unknown id {id}"));
                }
                if !seen.insert(id.as_str()) {
                    return Err(format!("{id} appears on more than one page"));
                }
            }
        }
        if seen.len() != self.suggestions.len() {
            return Err("some suggestion is on no page".into());
        }
        if self.suggestions.iter().any(|s| s.text.trim().is_empty()) {
            return Err("empty suggestion text".into());
        }
        if !self.degraded && self.suggestions.len() != SET_SIZE {
            return Err(format!(
                "{} suggestions in a full set",
                self.suggestions.len()
            ));
        }
        match self.source {
            SuggestionSource::WithInput => {
                if self
                    .suggestions
                    .iter()
                    .any(|s| s.attribute != SuggestionAttribute::Unlabeled)
                {
                    return Err("labeled suggestion in a with-input set".into());
                }
            }
            SuggestionSource::NoInput => {
                let count = |a| self.suggestions.iter().filter(|s| s.attribute == a).count();
                let (acc, dec, neu) = (
                    count(SuggestionAttribute::Accepting),
                    count(SuggestionAttribute::Declining),
                    count(SuggestionAttribute::Neutral),
                );
                if !self.degraded && (acc, dec, neu) != (2, 2, 2) {
                    return Err(format!("attribute counts {acc}/{dec}/{neu}"));
                }
                if acc > 0 && dec > 0 {
                    let first: Vec<_> = self.pages[0]
                        .iter()
                        .filter_map(|id| self.get(id))
                        .map(|s| s.attribute)
                        .collect();
                    if !(first.contains(&SuggestionAttribute::Accepting)
                        && first.contains(&SuggestionAttribute::Declining))
                    {
                        return Err("first page lacks an accepting/declining pair".into());
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SuggestionError {
    #[error("only {succeeded} of {SET_SIZE} suggestions generated: {last_error}")]
    GenerationFailed {
        succeeded: usize,
        last_error: LlmError,
    },
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Llm(#[from] LlmError),
}

/// Generation settings shared by all suggestion and reply calls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationOptions {
    pub sampling: SamplingConfig,
    /// Smallest partial set still returned when some calls fail.
    pub min_partial: usize,
    /// Issue the six calls of a set on separate threads.
    pub concurrent: bool,
}

impl Default for GenerationOptions {
    fn default() -> Self {
        Self {
            sampling: SamplingConfig::default(),
            min_partial: 2,
            concurrent: true,
        }
    }
}

/// What to generate for one widget.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuggestionRequest {
    pub anchor: usize,
    pub token: u64,
    /// Concatenation of all local responses entered so far.
    pub existing_reply: String,
    /// The widget's text, when non-empty.
    pub user_input: Option<String>,
    pub seed: u64,
}

impl SuggestionRequest {
    pub fn source(&self) -> SuggestionSource {
        if self.user_input.is_some() {
            SuggestionSource::WithInput
        } else {
            SuggestionSource::NoInput
        }
    }
}

/// Generation order for no-input sets: two per attribute.
const NO_INPUT_PLAN: [Attribute; SET_SIZE] = [
    Attribute::Accepting,
    Attribute::Accepting,
    Attribute::Declining,
    Attribute::Declining,
    Attribute::Neutral,
    Attribute::Neutral,
];

fn base_vars(email: &IncomingEmail) -> PromptVariables {
    PromptVariables {
        sender: Some(email.sender_name.clone()),
        email_text: Some(email.body.clone()),
        ..Default::default()
    }
}

pub fn generate_local_suggestions(
    email: &IncomingEmail,
    span: &SentenceSpan,
    request: &SuggestionRequest,
    client: &dyn LlmClient,
    options: &GenerationOptions,
) -> Result<SuggestionSet, SuggestionError> {
    let source = request.source();
    let mut jobs = Vec::with_capacity(SET_SIZE);
    for (slot, planned) in NO_INPUT_PLAN.iter().copied().enumerate() {
        let mut vars = base_vars(email);
        vars.existing_reply = Some(request.existing_reply.clone());
        vars.referenced_text = Some(span.text.clone());
        let (template, attribute) = match &request.user_input {
            None => {
                vars.attribute = Some(planned);
                (TemplateId::SentenceNoInput, planned.into())
            }
            Some(input) => {
                vars.input = Some(input.clone());
                (
                    TemplateId::SentenceWithInput,
                    SuggestionAttribute::Unlabeled,
                )
            }
        };
        let prompt = render_prompt(template, &vars)?;
        let mut llm = LlmRequest::new(prompt, vars, request.seed.wrapping_add(slot as u64));
        llm.sampling = options.sampling;
        jobs.push((slot, attribute, llm));
    }

    let call = |req: &LlmRequest| -> Result<String, LlmError> {
        let resp = client.complete(req)?;
        let text = resp.text.trim().to_owned();
        if text.is_empty() {
            return Err(LlmError::MalformedResponse("empty completion".into()));
        }
        Ok(text)
    };

    let results: Vec<Result<String, LlmError>> = if options.concurrent {
        std::thread::scope(|scope| {
            let handles: Vec<_> = jobs
                .iter()
                .map(|(_, _, req)| scope.spawn(|| call(req)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("suggestion worker panicked"))
                .collect()
        })
    } else {
        jobs.iter().map(|(_, _, req)| call(req)).collect()
    };

    let mut suggestions = Vec::with_capacity(SET_SIZE);
    let mut last_error = None;
    for ((slot, attribute, _), result) in jobs.iter().zip(results) {
        match result {
            Ok(text) => suggestions.push(Suggestion {
                id: format!("s{}.{}", request.token, slot),
                text,
                attribute: *attribute,
                source,
            }),
            Err(e) => last_error = Some(e),
        }
    }

    let degraded = suggestions.len() < SET_SIZE;
    if let Some(err) = last_error.filter(|_| suggestions.len() < options.min_partial.max(1)) {
        return Err(SuggestionError::GenerationFailed {
            succeeded: suggestions.len(),
            last_error: err,
        });
    }
    let pages = paginate(&suggestions, source);
    Ok(SuggestionSet {
        token: request.token,
        source,
        suggestions,
        pages,
        degraded,
    })
}

/// Page layout. No-input sets lead with one accepting and one declining
/// suggestion, then the neutral pair, then the remainder. With-input sets
/// keep generation order.
pub fn paginate(suggestions: &[Suggestion], source: SuggestionSource) -> Vec<Vec<String>> {
    let ordered: Vec<&Suggestion> = match source {
        SuggestionSource::WithInput => suggestions.iter().collect(),
        SuggestionSource::NoInput => {
            let of = |a| -> Vec<&Suggestion> {
                suggestions.iter().filter(|s| s.attribute == a).collect()
            };
            let mut accepting = of(SuggestionAttribute::Accepting);
            let mut declining = of(SuggestionAttribute::Declining);
            let neutral = of(SuggestionAttribute::Neutral);
            let mut out = Vec::with_capacity(suggestions.len());
            if !accepting.is_empty() && !declining.is_empty() {
                out.push(accepting.remove(0));
                out.push(declining.remove(0));
            }
            out.extend(neutral);
            out.extend(accepting);
            out.extend(declining);
            out
        }
    };
    ordered
        .chunks(PAGE_SIZE)
        .map(|c| c.iter().map(|s| s.id.clone()).collect())
        .collect()
}

/// Improvement pass. An empty draft falls back to full reply generation.
pub fn generate_improvement(
    email: &IncomingEmail,
    draft: &str,
    client: &dyn LlmClient,
    seed: u64,
    options: &GenerationOptions,
) -> Result<String, SuggestionError> {
    if draft.trim().is_empty() {
        return generate_message_reply(email, "", client, seed, options);
    }
    let mut vars = base_vars(email);
    vars.existing_reply = Some(draft.to_owned());
    let prompt = render_prompt(TemplateId::ImproveEmail, &vars)?;
    let mut req = LlmRequest::new(prompt, vars, seed);
    req.sampling = options.sampling;
    Ok(client.complete(&req)?.text)
}

pub fn generate_message_reply(
    email: &IncomingEmail,
    instruction: &str,
    client: &dyn LlmClient,
    seed: u64,
    options: &GenerationOptions,
) -> Result<String, SuggestionError> {
    let mut vars = base_vars(email);
    vars.input = Some(instruction.to_owned());
    let prompt = render_prompt(TemplateId::MessageReply, &vars)?;
    let mut req = LlmRequest::new(prompt, vars, seed);
    req.sampling = options.sampling;
    Ok(client.complete(&req)?.text)
}

#[cfg(test)]
mod tests {
    use std::sync::Mutex;

    use super::*;
    use crate::prompting::{LlmResponse, MockClient};

    /// Records every request and answers with the mock.
    #[derive(Default)]
    struct Capture {
        requests: Mutex<Vec<LlmRequest>>,
    }

    impl LlmClient for Capture {
        fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
            self.requests.lock().unwrap().push(request.clone());
            MockClient::new().complete(request)
        }
    }

    /// Fails the first `fail` slots of each set.
    struct Flaky {
        fail: u64,
    }

    impl LlmClient for Flaky {
        fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
            if request.seed % 100 < self.fail {
                return Err(LlmError::EndpointUnavailable("down".into()));
            }
            MockClient::new().complete(request)
        }
    }

    fn email() -> IncomingEmail {
        IncomingEmail::new(
            "e9",
            "Hannah Brooks",
            "Gift",
            "Hi Jamie,\n\nWe are collecting money for a gift. Which would you prefer?\n\nHannah",
        )
    }

    fn request(input: Option<&str>, existing: &str) -> SuggestionRequest {
        SuggestionRequest {
            anchor: 2,
            token: 5,
            existing_reply: existing.into(),
            user_input: input.map(str::to_owned),
            seed: 100,
        }
    }

    #[test]
    fn no_input_set_layout() {
        let email = email();
        let set = generate_local_suggestions(
            &email,
            &email.sentences[2],
            &request(None, ""),
            &MockClient::new(),
            &GenerationOptions::default(),
        )
        .unwrap();
        set.check_invariants().unwrap();
        let attr = |id: &str| set.get(id).unwrap().attribute;
        assert_eq!(
            set.pages[0].iter().map(|id| attr(id)).collect::<Vec<_>>(),
            [
                SuggestionAttribute::Accepting,
                SuggestionAttribute::Declining
            ]
        );
        assert_eq!(
            set.pages[1].iter().map(|id| attr(id)).collect::<Vec<_>>(),
            [SuggestionAttribute::Neutral, SuggestionAttribute::Neutral]
        );
        assert_eq!(set.page_of(&set.pages[2][1]), Some(3));
    }

    #[test]
    fn user_input_reaches_every_prompt() {
        let email = email();
        let capture = Capture::default();
        let set = generate_local_suggestions(
            &email,
            &email.sentences[2],
            &request(Some("balloon ride"), ""),
            &capture,
            &GenerationOptions::default(),
        )
        .unwrap();
        set.check_invariants().unwrap();
        assert!(set
            .suggestions
            .iter()
            .all(|s| s.attribute == SuggestionAttribute::Unlabeled));
        let reqs = capture.requests.lock().unwrap();
        assert_eq!(reqs.len(), 6);
        assert!(reqs.iter().all(|r| r.prompt.user.contains("balloon ride")));
    }

    #[test]
    fn existing_reply_is_quoted() {
        let email = email();
        let capture = Capture::default();
        generate_local_suggestions(
            &email,
            &email.sentences[1],
            &request(None, "Yes!\n\nCount me in."),
            &capture,
            &GenerationOptions::default(),
        )
        .unwrap();
        for r in capture.requests.lock().unwrap().iter() {
            assert!(r
                .prompt
                .user
                .contains("This is the reply you have written so far: \"Yes!\n\nCount me in.\""));
        }
    }

    #[test]
    fn partial_failure_degrades() {
        let email = email();
        let set = generate_local_suggestions(
            &email,
            &email.sentences[1],
            &request(None, ""),
            &Flaky { fail: 3 },
            &GenerationOptions::default(),
        )
        .unwrap();
        assert!(set.degraded);
        assert_eq!(set.suggestions.len(), 3);
        set.check_invariants().unwrap();
    }

    #[test]
    fn too_many_failures_error() {
        let email = email();
        let err = generate_local_suggestions(
            &email,
            &email.sentences[1],
            &request(None, ""),
            &Flaky { fail: 5 },
            &GenerationOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            SuggestionError::GenerationFailed { succeeded: 1, .. }
        ));
    }

    #[test]
    fn improvement_template_selection() {
        let email = email();
        let capture = Capture::default();
        let opts = GenerationOptions::default();
        generate_improvement(&email, "ok, 2pm works", &capture, 1, &opts).unwrap();
        generate_improvement(&email, "", &capture, 1, &opts).unwrap();
        let reqs = capture.requests.lock().unwrap();
        assert!(reqs[0]
            .prompt
            .user
            .contains("You have written this reply as an answer"));
        assert_eq!(reqs[1].prompt.template_id, TemplateId::MessageReply);
        assert!(reqs[1]
            .prompt
            .user
            .contains("following these instructions: \"\""));
    }

    #[test]
    fn message_reply_prompt() {
        let email = email();
        let capture = Capture::default();
        let opts = GenerationOptions::default();
        let a = generate_message_reply(&email, "decline politely", &capture, 4, &opts).unwrap();
        let b = generate_message_reply(&email, "decline politely", &MockClient::new(), 4, &opts)
            .unwrap();
        assert_eq!(a, b);
        let reqs = capture.requests.lock().unwrap();
        assert!(reqs[0]
            .prompt
            .user
            .contains("following these instructions: \"decline politely\""));
        assert!(reqs[0]
            .prompt
            .user
            .contains("add a greeting and a sign-off"));
    }
}

//! Prompt templates for sentence-level suggestions, the improvement pass and
//! message-level reply generation, plus the language-model client interface.

mod client;
mod mock;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use client::{LlmClient, LlmError, LlmRequest, LlmResponse, SamplingConfig};
pub use mock::MockClient;

/// Name the model writes as.
pub const PERSONA: &str = "Jamie Doe";

const SENTENCE_SYSTEM: &str = "You are answering an email sentence by sentence. For each given sentence think of a suitable reply. The reply should only answer the selected sentence.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    SentenceNoInput,
    SentenceWithInput,
    ImproveEmail,
    MessageReply,
}

impl TemplateId {
    pub const ALL: [TemplateId; 4] = [
        TemplateId::SentenceNoInput,
        TemplateId::SentenceWithInput,
        TemplateId::ImproveEmail,
        TemplateId::MessageReply,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::SentenceNoInput => "sentence_no_input",
            TemplateId::SentenceWithInput => "sentence_with_input",
            TemplateId::ImproveEmail => "improve_email",
            TemplateId::MessageReply => "message_reply",
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateId {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TemplateId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| PromptError::UnknownTemplate(s.to_owned()))
    }
}

/// Sentiment steering a no-input suggestion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    Accepting,
    Neutral,
    Declining,
}

impl Attribute {
    pub fn as_str(self) -> &'static str {
        match self {
            Attribute::Accepting => "accepting",
            Attribute::Neutral => "neutral",
            Attribute::Declining => "declining",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variable {
    Sender,
    EmailText,
    ExistingReply,
    Attribute,
    ReferencedText,
    Input,
}

impl Variable {
    pub fn name(self) -> &'static str {
        match self {
            Variable::Sender => "sender",
            Variable::EmailText => "email_text",
            Variable::ExistingReply => "existing_reply",
            Variable::Attribute => "attribute",
            Variable::ReferencedText => "referenced_text",
            Variable::Input => "input",
        }
    }

    fn from_name(name: &str) -> Option<Variable> {
        [
            Variable::Sender,
            Variable::EmailText,
            Variable::ExistingReply,
            Variable::Attribute,
            Variable::ReferencedText,
            Variable::Input,
        ]
        .into_iter()
        .find(|v| v.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("missing prompt variable `{0}`")]
    MissingVariable(&'static str),
    #[error("unknown template `{0}`")]
    UnknownTemplate(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub user: String,
    pub assistant: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub template_id: TemplateId,
    pub system_text: &'static str,
    /// Pattern with `{name}` placeholders.
    pub user_text_pattern: &'static str,
    pub variables: &'static [Variable],
    few_shot_source: &'static str,
}

impl PromptTemplate {
    pub fn get(id: TemplateId) -> PromptTemplate {
        use Variable::*;
        match id {
            TemplateId::SentenceNoInput => PromptTemplate {
                template_id: id,
                system_text: SENTENCE_SYSTEM,
                user_text_pattern: "You are Jamie Doe and have received this email from {sender}: '{email_text}'.\n{existing_reply}Formulate a short, {attribute} reply to this selected part of the email: '{referenced_text}'. Only output the short reply in one or two sentences.",
                variables: &[Sender, EmailText, ExistingReply, Attribute, ReferencedText],
                few_shot_source: include_str!("../../data/few_shot/sentence_no_input.json"),
            },
            TemplateId::SentenceWithInput => PromptTemplate {
                template_id: id,
                system_text: SENTENCE_SYSTEM,
                user_text_pattern: "You are Jamie Doe and have received this email from {sender}:\"{email_text}\".\n{existing_reply}Formulate a short reply to this selected part of the email: \"{referenced_text}\". Incorporate this information into your reply: \"{input}\".  Only output the short reply in one or two sentences.",
                variables: &[Sender, EmailText, ExistingReply, ReferencedText, Input],
                few_shot_source: include_str!("../../data/few_shot/sentence_with_input.json"),
            },
            TemplateId::ImproveEmail => PromptTemplate {
                template_id: id,
                system_text: "You have received an email and have drafted a reply. Now you review your draft and make some final edits to make it sound better. You output the entire improved email at once and nothing else.",
                user_text_pattern: "You are Jamie Doe and have received this email from {sender}:\"{email_text}\"\nYou have written this reply as an answer:\"{existing_reply}\"\nYou improve this email by fixing any mistakes and adding an email greeting or sign-off if missing. You also make sure to make it sound better but you do not change the content of the email. At last you only output the well formatted email.",
                variables: &[Sender, EmailText, ExistingReply],
                few_shot_source: include_str!("../../data/few_shot/improve_email.json"),
            },
            TemplateId::MessageReply => PromptTemplate {
                template_id: id,
                system_text: "You have received an email and are writing a response to it.",
                user_text_pattern: "You are Jamie Doe and have received this email from {sender}:\"{email_text}\"\nYou answer with a well written email following these instructions: \"{input}\". You make sure to add a greeting and a sign-off. You do not make anything up that is not mentioned in the instruction. You double check that the email is well formatted.",
                variables: &[Sender, EmailText, Input],
                few_shot_source: include_str!("../../data/few_shot/message_reply.json"),
            },
        }
    }

    /// The closing instruction every rendered prompt ends with.
    pub fn final_instruction(&self) -> &'static str {
        match self.template_id {
            TemplateId::SentenceNoInput | TemplateId::SentenceWithInput => {
                "Only output the short reply in one or two sentences."
            }
            TemplateId::ImproveEmail => "At last you only output the well formatted email.",
            TemplateId::MessageReply => "You double check that the email is well formatted.",
        }
    }

    pub fn few_shot_examples(&self) -> Vec<FewShotExample> {
        serde_json::from_str(self.few_shot_source).expect("bundled few-shot data is valid JSON")
    }

    /// Placeholder names in the user pattern, in order of appearance.
    pub fn pattern_variables(&self) -> Vec<Variable> {
        let mut out = Vec::new();
        for piece in parse_pattern(self.user_text_pattern) {
            if let Piece::Var(name) = piece {
                let var = Variable::from_name(name).expect("known placeholder");
                if !out.contains(&var) {
                    out.push(var);
                }
            }
        }
        out
    }
}

enum Piece<'a> {
    Text(&'a str),
    Var(&'a str),
}

fn parse_pattern(pattern: &str) -> Vec<Piece<'_>> {
    let mut pieces = Vec::new();
    let mut rest = pattern;
    while let Some(open) = rest.find('{') {
        let Some(close) = rest[open..].find('}') else {
            break;
        };
        let name = &rest[open + 1..open + close];
        if Variable::from_name(name).is_none() {
            pieces.push(Piece::Text(&rest[..open + 1]));
            rest = &rest[open + 1..];
            continue;
        }
        pieces.push(Piece::Text(&rest[..open]));
        pieces.push(Piece::Var(name));
        rest = &rest[open + close + 1..];
    }
    pieces.push(Piece::Text(rest));
    pieces
}

/// Values substituted into a template. `None` means "not supplied".
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptVariables {
    pub sender: Option<String>,
    pub email_text: Option<String>,
    /// Reply text written so far; empty when nothing has been written yet.
    pub existing_reply: Option<String>,
    pub attribute: Option<Attribute>,
    pub referenced_text: Option<String>,
    pub input: Option<String>,
}

impl PromptVariables {
    fn value(&self, template: TemplateId, var: Variable) -> Result<String, PromptError> {
        let missing = || PromptError::MissingVariable(var.name());
        match var {
            Variable::Sender => self.sender.clone().ok_or_else(missing),
            Variable::EmailText => self.email_text.clone().ok_or_else(missing),
            Variable::ReferencedText => self.referenced_text.clone().ok_or_else(missing),
            Variable::Input => self.input.clone().ok_or_else(missing),
            Variable::Attribute => self
                .attribute
                .map(|a| a.as_str().to_owned())
                .ok_or_else(missing),
            Variable::ExistingReply => {
                let existing = self.existing_reply.as_deref().ok_or_else(missing)?;
                Ok(match template {
                    // The improvement template quotes the draft itself.
                    TemplateId::ImproveEmail => existing.to_owned(),
                    _ => existing_reply_clause(existing),
                })
            }
        }
    }
}

/// The sentence-level `existing_reply` substitution: a quoted clause, or
/// nothing when no reply text exists yet.
pub fn existing_reply_clause(existing: &str) -> String {
    if existing.is_empty() {
        String::new()
    } else {
        format!("This is the reply you have written so far: \"{existing}\" ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub template_id: TemplateId,
    pub system: String,
    pub examples: Vec<FewShotExample>,
    pub user: String,
}

impl RenderedPrompt {
    /// Flat transcript form used for golden files and request hashing.
    pub fn to_text(&self) -> String {
        let mut out = format!("System: {}\n", self.system);
        for example in &self.examples {
            out.push_str(&format!(
                "Example user: {}\nExample assistant: {}\n",
                example.user, example.assistant
            ));
        }
        out.push_str(&format!("User: {}\n", self.user));
        out
    }
}

pub fn render_prompt(
    template_id: TemplateId,
    vars: &PromptVariables,
) -> Result<RenderedPrompt, PromptError> {
    let template = PromptTemplate::get(template_id);
    let mut user = String::with_capacity(template.user_text_pattern.len() * 2);
    for piece in parse_pattern(template.user_text_pattern) {
        match piece {
            Piece::Text(t) => user.push_str(t),
            Piece::Var(name) => {
                let var = Variable::from_name(name).expect("known placeholder");
                user.push_str(&vars.value(template_id, var)?);
            }
        }
    }
    Ok(RenderedPrompt {
        template_id,
        system: template.system_text.to_owned(),
        examples: template.few_shot_examples(),
        user,
    })
}

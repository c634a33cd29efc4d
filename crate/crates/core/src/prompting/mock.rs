use sha2::{Digest, Sha256};

use super::{Attribute, LlmClient, LlmError, LlmRequest, LlmResponse, TemplateId};
use crate::segmenter::segment_email;
use crate::text::{
    capitalize_first, first_name, is_greeting_line, is_sign_off_line, lowercase_first, GREETINGS,
    SIGN_OFFS,
};

const ACCEPTING: &[&str] = &[
    "Yes, {topic} works well for me.",
    "Sure, I am happy to go ahead with {topic}.",
    "That sounds great, count me in for {topic}.",
    "Absolutely, {topic} is fine with me.",
];

const DECLINING: &[&str] = &[
    "Unfortunately, {topic} does not work for me.",
    "I am afraid I have to pass on {topic} this time.",
    "Sorry, I will not be able to help with {topic}.",
    "Thanks, but {topic} is not possible for me right now.",
];

const NEUTRAL: &[&str] = &[
    "Thanks for letting me know about {topic}.",
    "Noted, I will get back to you about {topic} soon.",
    "Let me check my schedule regarding {topic}.",
    "Good to hear about {topic}, thanks for the update.",
];

const WITH_INPUT: &[&str] = &[
    "Regarding {topic}: {input}.",
    "As for {topic}, {input_lower}.",
    "Just to let you know about {topic}: {input}.",
    "{input}, as far as {topic} is concerned.",
];

const CLOSERS: &[&str] = &[
    "Please let me know if you have any questions.",
    "Looking forward to hearing from you.",
    "Let me know if anything else comes up.",
    "Thanks again for reaching out.",
];

/// Offline stand-in for a language model.
///
/// Output is a pure function of the request bytes (which include the seed),
/// so identical requests give identical text in any process.
#[derive(Debug, Clone, Default)]
pub struct MockClient {
    failure: Option<LlmError>,
}

impl MockClient {
    pub fn new() -> Self {
        Self::default()
    }

    /// A mock that fails every call with `error`.
    pub fn failing(error: LlmError) -> Self {
        Self {
            failure: Some(error),
        }
    }

    /// Identifies which template, attribute and referenced sentence a
    /// response was synthesized for.
    pub fn echo_tag(request: &LlmRequest) -> String {
        let attribute = request.vars.attribute.map_or("-", Attribute::as_str);
        let referenced = request.vars.referenced_text.as_deref().unwrap_or("");
        format!(
            "mock/{}/{}/{:08x}",
            request.prompt.template_id,
            attribute,
            digest(referenced.as_bytes()) as u32
        )
    }

    fn synthesize(&self, request: &LlmRequest) -> String {
        let h = digest(&request.canonical_bytes());
        let vars = &request.vars;
        match request.prompt.template_id {
            TemplateId::SentenceNoInput => {
                let bank = match vars.attribute.unwrap_or(Attribute::Neutral) {
                    Attribute::Accepting => ACCEPTING,
                    Attribute::Declining => DECLINING,
                    Attribute::Neutral => NEUTRAL,
                };
                let topic = topic_of(vars.referenced_text.as_deref().unwrap_or(""));
                pick(bank, h).replace("{topic}", &topic)
            }
            TemplateId::SentenceWithInput => {
                let topic = topic_of(vars.referenced_text.as_deref().unwrap_or(""));
                let input = vars.input.as_deref().unwrap_or("").trim();
                let input = input.trim_end_matches(['.', '!', '?']);
                capitalize_first(
                    &pick(WITH_INPUT, h)
                        .replace("{topic}", &topic)
                        .replace("{input_lower}", &lowercase_first(input))
                        .replace("{input}", &capitalize_first(input)),
                )
            }
            TemplateId::ImproveEmail => {
                let sender = vars.sender.as_deref().unwrap_or("there");
                improve(vars.existing_reply.as_deref().unwrap_or(""), sender, h)
            }
            TemplateId::MessageReply => {
                let sender = vars.sender.as_deref().unwrap_or("there");
                message_reply(
                    vars.email_text.as_deref().unwrap_or(""),
                    vars.input.as_deref().unwrap_or(""),
                    sender,
                    h,
                )
            }
        }
    }
}

impl LlmClient for MockClient {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        if let Some(err) = &self.failure {
            return Err(err.clone());
        }
        Ok(LlmResponse {
            text: self.synthesize(request),
            latency_ms: 0,
            client: Self::echo_tag(request),
        })
    }
}

fn digest(bytes: &[u8]) -> u64 {
    let d = Sha256::digest(bytes);
    let mut first = [0u8; 8];
    first.copy_from_slice(&d[..8]);
    u64::from_be_bytes(first)
}

fn pick(bank: &[&'static str], h: u64) -> &'static str {
    bank[(h % bank.len() as u64) as usize]
}

/// The last few words of a sentence, used to anchor a reply to it.
fn topic_of(sentence: &str) -> String {
    let words: Vec<&str> = sentence
        .split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|w| !w.is_empty())
        .collect();
    if words.is_empty() {
        return "this".to_owned();
    }
    let take = words.len().min(4);
    let mut topic = words[words.len() - take..].join(" ");
    if take < words.len() || words.len() > 1 {
        topic = lowercase_first(&topic);
    }
    format!("\"{topic}\"")
}

fn tidy_sentence(paragraph: &str) -> String {
    let mut words: Vec<&str> = Vec::new();
    for w in paragraph.split_whitespace() {
        if words
            .last()
            .is_some_and(|prev| prev.eq_ignore_ascii_case(w))
        {
            continue;
        }
        words.push(w);
    }
    let mut out = capitalize_first(&words.join(" "));
    // " i " is the most common lowercase slip.
    out = out.replace(" i ", " I ");
    if out.ends_with(|c: char| c.is_alphanumeric()) {
        out.push('.');
    }
    out
}

fn improve(draft: &str, sender: &str, h: u64) -> String {
    let lines: Vec<&str> = draft
        .split('\n')
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect();
    let has_greeting = lines
        .first()
        .is_some_and(|l| is_greeting_line(l, GREETINGS));
    let tail = &lines[lines.len().saturating_sub(3)..];
    let has_sign_off = tail.iter().any(|l| is_sign_off_line(l, SIGN_OFFS));

    let mut paragraphs: Vec<Vec<String>> = Vec::new();
    if !has_greeting {
        paragraphs.push(vec![format!("Hi {},", first_name(sender))]);
    }
    let mut current: Vec<String> = Vec::new();
    let mut after_sign_off = false;
    for line in draft.split('\n').map(str::trim) {
        if line.is_empty() {
            if !current.is_empty() {
                paragraphs.push(std::mem::take(&mut current));
            }
            continue;
        }
        let frame = is_greeting_line(line, GREETINGS) || is_sign_off_line(line, SIGN_OFFS);
        current.push(if frame || after_sign_off {
            line.to_owned()
        } else {
            tidy_sentence(line)
        });
        after_sign_off = is_sign_off_line(line, SIGN_OFFS);
    }
    if !current.is_empty() {
        paragraphs.push(current);
    }
    if !has_sign_off {
        paragraphs.push(vec![pick(CLOSERS, h).to_owned()]);
        paragraphs.push(vec!["Best regards,".to_owned(), "Jamie".to_owned()]);
    }
    paragraphs
        .iter()
        .map(|p| p.join("\n"))
        .collect::<Vec<_>>()
        .join("\n\n")
}

fn message_reply(email_text: &str, instruction: &str, sender: &str, h: u64) -> String {
    let mut out = format!("Hi {},\n\nThank you for your email.", first_name(sender));
    let instruction = instruction.trim();
    if !instruction.is_empty() {
        out.push(' ');
        out.push_str(&tidy_sentence(instruction));
    }
    let mut answers = Vec::new();
    for (k, span) in segment_email(email_text)
        .iter()
        .filter(|s| s.text.ends_with(['.', '!', '?']))
        .take(6)
        .enumerate()
    {
        let bank = if span.text.ends_with('?') {
            ACCEPTING
        } else {
            NEUTRAL
        };
        let hk = h.rotate_left(7 * k as u32 + 3);
        answers.push(pick(bank, hk).replace("{topic}", &topic_of(&span.text)));
    }
    if !answers.is_empty() {
        out.push_str("\n\n");
        out.push_str(&answers.join(" "));
    }
    out.push_str("\n\n");
    out.push_str(pick(CLOSERS, h));
    out.push_str("\n\nKind regards,\nJamie");
    out
}

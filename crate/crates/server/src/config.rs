use std::path::PathBuf;
use std::time::Duration;

use cdlr_core::SamplingConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct LlmSettings {
    pub endpoint: Option<String>,
    pub model: String,
    /// Sent as a bearer token when present.
    pub api_key: Option<String>,
    pub timeout: Duration,
    /// Extra attempts after the first failure.
    pub retries: u32,
    /// When set, no request ever reaches the endpoint.
    pub mock: bool,
    pub sampling: SamplingConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub port: u16,
    pub corpus_path: PathBuf,
    pub log_dir: PathBuf,
    pub static_dir: Option<PathBuf>,
    pub llm: LlmSettings,
    /// Default long-poll wait for suggestion sets.
    pub poll_wait: Duration,
    /// Suggestion refresh debounce the UI should apply.
    pub debounce: Duration,
    /// Reject corpora that do not hold exactly nine emails.
    pub strict_corpus: bool,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            port: 8080,
            corpus_path: PathBuf::from("corpus"),
            log_dir: PathBuf::from("logs"),
            static_dir: None,
            llm: LlmSettings {
                endpoint: None,
                model: "gpt-4o-mini".into(),
                api_key: None,
                timeout: Duration::from_millis(20_000),
                retries: 2,
                mock: true,
                sampling: SamplingConfig::default(),
            },
            poll_wait: Duration::from_millis(10_000),
            debounce: Duration::from_millis(400),
            strict_corpus: true,
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("invalid value for {name}: {value}")]
pub struct ConfigError {
    pub name: &'static str,
    pub value: String,
}

fn parse<T: std::str::FromStr>(
    get: &dyn Fn(&str) -> Option<String>,
    name: &'static str,
) -> Result<Option<T>, ConfigError> {
    match get(name) {
        None => Ok(None),
        Some(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| ConfigError { name, value: v }),
    }
}

fn parse_bool(value: &str) -> Option<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Some(true),
        "0" | "false" | "no" | "off" => Some(false),
        _ => None,
    }
}

impl Config {
    pub fn from_env() -> Result<Config, ConfigError> {
        Self::from_lookup(&|k| std::env::var(k).ok())
    }

    /// Reads settings through `get`, falling back to defaults. Mock mode is
    /// on unless `MOCK_MODE` says otherwise and an endpoint is configured.
    pub fn from_lookup(get: &dyn Fn(&str) -> Option<String>) -> Result<Config, ConfigError> {
        let mut c = Config::default();
        if let Some(p) = parse(get, "PORT")? {
            c.port = p;
        }
        if let Some(p) = get("CORPUS_PATH") {
            c.corpus_path = p.into();
        }
        if let Some(p) = get("LOG_DIR") {
            c.log_dir = p.into();
        }
        c.static_dir = get("STATIC_DIR").map(PathBuf::from);
        c.llm.endpoint = get("LLM_ENDPOINT").filter(|s| !s.trim().is_empty());
        if let Some(m) = get("LLM_MODEL") {
            c.llm.model = m;
        }
        c.llm.api_key = get("LLM_API_KEY").filter(|s| !s.is_empty());
        if let Some(ms) = parse::<u64>(get, "LLM_TIMEOUT_MS")? {
            c.llm.timeout = Duration::from_millis(ms);
        }
        if let Some(r) = parse(get, "LLM_RETRIES")? {
            c.llm.retries = r;
        }
        if let Some(t) = parse(get, "LLM_TEMPERATURE")? {
            c.llm.sampling.temperature = t;
        }
        if let Some(t) = parse(get, "LLM_MAX_TOKENS")? {
            c.llm.sampling.max_tokens = t;
        }
        c.llm.mock = match get("MOCK_MODE") {
            Some(v) => parse_bool(&v).ok_or(ConfigError {
                name: "MOCK_MODE",
                value: v,
            })?,
            None => c.llm.endpoint.is_none(),
        };
        if let Some(ms) = parse::<u64>(get, "POLL_WAIT_MS")? {
            c.poll_wait = Duration::from_millis(ms);
        }
        if let Some(ms) = parse::<u64>(get, "DEBOUNCE_MS")? {
            c.debounce = Duration::from_millis(ms);
        }
        if let Some(v) = get("STRICT_CORPUS") {
            c.strict_corpus = parse_bool(&v).ok_or(ConfigError {
                name: "STRICT_CORPUS",
                value: v,
            })?;
        }
        Ok(c)
    }
}

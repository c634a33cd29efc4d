//! JSONL session logs: an optional header line followed by one
//! [`EventRecord`] per line.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::event::EventRecord;
use super::state::UiMode;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogHeader {
    pub participant: u64,
    pub task_index: usize,
    pub mode: UiMode,
    pub email_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SessionLog {
    pub header: Option<LogHeader>,
    pub events: Vec<EventRecord>,
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    header: LogHeader,
}

/// Parses a log. Blank lines are skipped; line numbers in errors are 1-based.
pub fn read_log(text: &str) -> Result<SessionLog, LogError> {
    let mut log = SessionLog::default();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |e: serde_json::Error| LogError::Malformed {
            line: i + 1,
            message: e.to_string(),
        };
        if log.header.is_none() && log.events.is_empty() && line.starts_with("{\"header\"") {
            let h: HeaderLine = serde_json::from_str(line).map_err(malformed)?;
            log.header = Some(h.header);
            continue;
        }
        log.events
            .push(serde_json::from_str(line).map_err(malformed)?);
    }
    Ok(log)
}

/// Writes one JSON document per line, each with a single `write_all` and a
/// flush, so a crash leaves only whole lines behind.
pub struct JsonlWriter<W: Write> {
    inner: W,
}

impl<W: Write> JsonlWriter<W> {
    pub fn new(inner: W) -> Self {
        Self { inner }
    }

    pub fn write_header(&mut self, header: &LogHeader) -> io::Result<()> {
        self.write_line(&HeaderLine {
            header: header.clone(),
        })
    }

    pub fn write_event(&mut self, record: &EventRecord) -> io::Result<()> {
        self.write_line(record)
    }

    fn write_line<T: Serialize>(&mut self, value: &T) -> io::Result<()> {
        let mut line = serde_json::to_vec(value).map_err(io::Error::other)?;
        line.push(b'\n');
        self.inner.write_all(&line)?;
        self.inner.flush()
    }

    pub fn into_inner(self) -> W {
        self.inner
    }
}

impl SessionLog {
    pub fn to_jsonl(&self) -> String {
        let mut w = JsonlWriter::new(Vec::new());
        if let Some(h) = &self.header {
            w.write_header(h).expect("writing to memory");
        }
        for e in &self.events {
            w.write_event(e).expect("writing to memory");
        }
        String::from_utf8(w.into_inner()).expect("json is utf-8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::Event;

    #[test]
    fn round_trip_with_header() {
        let log = SessionLog {
            header: Some(LogHeader {
                participant: 4,
                task_index: 2,
                mode: UiMode::Msg,
                email_id: "e4_lunch".into(),
            }),
            events: vec![EventRecord {
                seq: 0,
                t_ms: 0,
                event: Event::MsgDiscarded {},
            }],
        };
        let text = log.to_jsonl();
        assert!(text.starts_with(
            r#"{"header":{"participant":4,"task_index":2,"mode":"MSG","email_id":"e4_lunch"}}"#
        ));
        assert_eq!(read_log(&text).unwrap(), log);
    }

    #[test]
    fn reports_line_numbers() {
        let err =
            read_log("{\"seq\":0,\"t_ms\":0,\"kind\":\"msg_discarded\",\"payload\":{}}\n{oops")
                .unwrap_err();
        assert!(matches!(err, LogError::Malformed { line: 2, .. }));
    }
}

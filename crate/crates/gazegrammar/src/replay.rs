//! Re-run a recorded session log through a fresh session and diff the
//! outgoing messages as raw text.

use std::path::Path;

use serde::Deserialize;
use serde_json::value::RawValue;
use thiserror::Error;

use crate::config::Config;
use crate::protocol::{ClientEnvelope, ClientMessage, ServerEnvelope};
use crate::session::Session;

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("cannot read session log {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("session log line {line}: {message}")]
    Malformed { line: usize, message: String },
}

#[derive(Deserialize)]
struct LogLine<'a> {
    dir: &'a str,
    #[serde(borrow)]
    msg: &'a RawValue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Divergence {
    /// Zero-based index among outgoing messages.
    pub index: usize,
    pub expected: Option<String>,
    pub actual: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub inputs: usize,
    pub outputs_compared: usize,
    pub divergence: Option<Divergence>,
}

impl ReplayReport {
    pub fn identical(&self) -> bool {
        self.divergence.is_none()
    }
}

pub fn replay_file(path: &Path) -> Result<ReplayReport, ReplayError> {
    let text = std::fs::read_to_string(path).map_err(|source| ReplayError::Io {
        path: path.display().to_string(),
        source,
    })?;
    replay_text(&text)
}

pub fn replay_text(text: &str) -> Result<ReplayReport, ReplayError> {
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let line: LogLine = serde_json::from_str(raw).map_err(|e| ReplayError::Malformed {
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.dir != "in" && line.dir != "out" {
            return Err(ReplayError::Malformed {
                line: i + 1,
                message: format!("unknown direction `{}`", line.dir),
            });
        }
        lines.push((i + 1, line));
    }
    let expected: Vec<&str> = lines.iter().filter(|(_, l)| l.dir == "out").map(|(_, l)| l.msg.get()).collect();
    let mut inputs = lines.iter().filter(|(_, l)| l.dir == "in");

    let malformed = |line: usize, message: String| ReplayError::Malformed { line, message };
    let (first_line, first) = inputs.next().ok_or_else(|| malformed(1, "log has no input messages".into()))?;
    let open_env: ClientEnvelope =
        serde_json::from_str(first.msg.get()).map_err(|e| malformed(*first_line, e.to_string()))?;
    let ClientMessage::OpenSession(open) = &open_env.body else {
        return Err(malformed(*first_line, "first input is not open_session".into()));
    };
    let id = expected
        .first()
        .and_then(|s| serde_json::from_str::<ServerEnvelope>(s).ok())
        .and_then(|e| e.session_id)
        .ok_or_else(|| malformed(*first_line, "no session_opened reply recorded".into()))?;

    let mut actual = Vec::new();
    let mut push = |outs: &[crate::session::Outgoing]| {
        for o in outs {
            actual.push(serde_json::to_string(o.envelope()).expect("serializable"));
        }
    };
    let mut n_inputs = 1;
    match Session::open(&id, open_env.seq, open, &Config::default(), None, None) {
        Ok(opened) => {
            push(&opened.outputs);
            let mut session = opened.session;
            for (line, l) in inputs {
                let env: ClientEnvelope = serde_json::from_str(l.msg.get()).map_err(|e| malformed(*line, e.to_string()))?;
                push(&session.handle(&env));
                n_inputs += 1;
            }
        }
        Err(e) => {
            actual.push(serde_json::to_string(&crate::protocol::Envelope::new(e).with_seq(open_env.seq)).expect("serializable"));
        }
    }

    let n = expected.len().max(actual.len());
    let divergence = (0..n)
        .find(|&i| expected.get(i).copied() != actual.get(i).map(String::as_str))
        .map(|index| Divergence {
            index,
            expected: expected.get(index).map(|s| s.to_string()),
            actual: actual.get(index).cloned(),
        });
    Ok(ReplayReport {
        inputs: n_inputs,
        outputs_compared: expected.len().min(actual.len()),
        divergence,
    })
}

//! Replays the responses of a recorded conversation in order.
//!
//! Input is the `conversation.jsonl` file a run writes: one object per line
//! with `kind` either `"prompt"` or `"response"`. Only the raw text of the
//! responses is used; each is re-parsed against the active whitelist.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::policy::{DecisionPolicy, Exchange, PolicyError};
use super::{parse_decision, ActionName, Decision, QueryRecord};

/// One line of a conversation record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversationEntry {
    pub t: f64,
    pub kind: EntryKind,
    pub text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub actions: Vec<ActionName>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryKind {
    Prompt,
    Response,
}

#[derive(Debug, Clone)]
pub struct ReplayPolicy {
    responses: Vec<String>,
    next: usize,
    valid: Vec<ActionName>,
}

impl ReplayPolicy {
    pub fn new(responses: Vec<String>, valid: Vec<ActionName>) -> Self {
        Self { responses, next: 0, valid }
    }

    pub fn from_file(path: impl AsRef<Path>, valid: Vec<ActionName>) -> Result<Self, PolicyError> {
        let path = path.as_ref();
        let mut responses = Vec::new();
        for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: ConversationEntry = serde_json::from_str(&line)
                .map_err(|e| PolicyError::BadArgument(format!("{}:{}: {e}", path.display(), i + 1)))?;
            if entry.kind == EntryKind::Response {
                responses.push(entry.text);
            }
        }
        Ok(Self::new(responses, valid))
    }

    pub fn remaining(&self) -> usize {
        self.responses.len() - self.next
    }
}

impl DecisionPolicy for ReplayPolicy {
    fn name(&self) -> &str {
        "replay"
    }

    fn decide(&mut self, _query: &QueryRecord, _history: &[Exchange]) -> Result<Decision, PolicyError> {
        let raw = self.responses.get(self.next).ok_or(PolicyError::ReplayExhausted(self.next))?;
        self.next += 1;
        Ok(parse_decision(raw, &self.valid)?)
    }
}

use std::collections::VecDeque;
use std::path::Path;
use std::sync::Mutex;

use serde::Deserialize;

use super::{Agent, AgentReply, BackendError, BackendKind, ChatRequest};

/// Replays a fixed queue of responses, then reports itself unavailable.
#[derive(Debug)]
pub struct MockAgent {
    id: String,
    queue: Mutex<VecDeque<AgentReply>>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum FixtureLine {
    Text(String),
    Object {
        content: String,
        #[serde(default)]
        token_count: Option<u64>,
    },
}

impl MockAgent {
    pub fn new<I, S>(id: impl Into<String>, responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            id: id.into(),
            queue: Mutex::new(responses.into_iter().map(|s| AgentReply::text(s)).collect()),
        }
    }

    /// Loads canned responses from JSONL: each line is a JSON string or
    /// `{"content": ..., "token_count": ...}`.
    pub fn from_jsonl(id: impl Into<String>, path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_jsonl_str(id, &text)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    pub fn from_jsonl_str(id: impl Into<String>, text: &str) -> Result<Self, serde_json::Error> {
        let mut queue = VecDeque::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let reply = match serde_json::from_str::<FixtureLine>(line)? {
                FixtureLine::Text(content) => AgentReply::text(content),
                FixtureLine::Object {
                    content,
                    token_count,
                } => AgentReply {
                    content,
                    token_count,
                    retries: 0,
                },
            };
            queue.push_back(reply);
        }
        Ok(Self {
            id: id.into(),
            queue: Mutex::new(queue),
        })
    }

    pub fn remaining(&self) -> usize {
        self.queue.lock().expect("mock queue poisoned").len()
    }
}

impl Agent for MockAgent {
    fn id(&self) -> &str {
        &self.id
    }

    fn kind(&self) -> BackendKind {
        BackendKind::Mock
    }

    fn respond(&self, _request: &ChatRequest) -> Result<AgentReply, BackendError> {
        self.queue
            .lock()
            .expect("mock queue poisoned")
            .pop_front()
            .ok_or_else(|| BackendError::BackendUnavailable(format!("mock {} exhausted", self.id)))
    }
}

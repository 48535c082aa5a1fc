//! Agent backends behind one interface: remote chat-completion models,
//! canned mock responses and deterministic scripted players.

mod mock;
mod remote;
pub mod script;
mod scripted;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::ChatMessage;

pub use mock::MockAgent;
pub use remote::{RateLimiter, RateLimiterRegistry, RemoteAgent, RemoteEndpointConfig};
pub use scripted::{BeliefState, FaultKind, ScriptedAgent, ScriptedPolicy};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("malformed provider response: {0}")]
    MalformedProviderResponse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    RemoteLlm,
    Scripted,
    Mock,
}

/// What a backend is asked to continue.
#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    /// Overrides the backend's configured sampling temperature.
    pub temperature: Option<f64>,
}

impl ChatRequest {
    pub fn new(messages: Vec<ChatMessage>) -> Self {
        Self {
            messages,
            temperature: None,
        }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = Some(temperature);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentReply {
    pub content: String,
    /// Provider-reported completion tokens, when available.
    pub token_count: Option<u64>,
    /// Retries spent before the successful attempt.
    pub retries: u32,
}

impl AgentReply {
    pub fn text(content: impl Into<String>) -> Self {
        Self {
            content: content.into(),
            token_count: None,
            retries: 0,
        }
    }
}

/// A participant in a rollout, or a grader.
///
/// Implementations are shared between concurrently running rollouts, so
/// `respond` takes `&self` and must not mutate the request.
pub trait Agent: Send + Sync {
    fn id(&self) -> &str;

    fn kind(&self) -> BackendKind;

    fn respond(&self, request: &ChatRequest) -> Result<AgentReply, BackendError>;
}

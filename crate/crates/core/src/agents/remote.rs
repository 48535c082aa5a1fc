use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Agent, AgentReply, BackendError, BackendKind, ChatRequest};
use crate::protocol::{fold_system_prompt, ChatMessage};

const MAX_BACKOFF: Duration = Duration::from_secs(60);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteEndpointConfig {
    /// Endpoint root; requests go to `<base_url>/chat/completions`.
    pub base_url: String,
    pub model_name: String,
    /// Environment variable holding the bearer token. Empty means no auth header.
    pub auth_env_var: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub min_retry_backoff_ms: u64,
    #[serde(default = "default_timeout_ms")]
    pub request_timeout_ms: u64,
    /// Provider accepts only a leading system message (or none): fold it into the first user turn.
    #[serde(default)]
    pub fold_system_prompt: bool,
    /// Minimum spacing between request admissions on this endpoint.
    #[serde(default)]
    pub min_request_interval_ms: u64,
}

fn default_temperature() -> f64 {
    1.0
}

fn default_max_retries() -> u32 {
    5
}

fn default_backoff_ms() -> u64 {
    1_000
}

fn default_timeout_ms() -> u64 {
    120_000
}

impl RemoteEndpointConfig {
    pub fn new(base_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model_name: model_name.into(),
            auth_env_var: String::new(),
            temperature: default_temperature(),
            max_retries: default_max_retries(),
            min_retry_backoff_ms: default_backoff_ms(),
            request_timeout_ms: default_timeout_ms(),
            fold_system_prompt: false,
            min_request_interval_ms: 0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.request_timeout_ms == 0 {
            return Err("request_timeout_ms must be positive".into());
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(format!("temperature must be non-negative, got {}", self.temperature));
        }
        Ok(())
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }
}

/// Serializes request admission for one endpoint.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next_slot: Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn new(interval: Duration) -> Self {
        Self {
            interval,
            next_slot: Mutex::new(None),
        }
    }

    /// Blocks until the caller may issue a request.
    pub fn acquire(&self) {
        let mut slot = self.next_slot.lock().expect("rate limiter poisoned");
        let now = Instant::now();
        if let Some(at) = *slot {
            if at > now {
                thread::sleep(at - now);
            }
        }
        *slot = Some(Instant::now() + self.interval);
    }
}

/// Hands out one shared limiter per endpoint URL.
#[derive(Debug, Default)]
pub struct RateLimiterRegistry {
    limiters: Mutex<HashMap<String, Arc<RateLimiter>>>,
}

impl RateLimiterRegistry {
    pub fn limiter_for(&self, base_url: &str, interval: Duration) -> Arc<RateLimiter> {
        let key = base_url.trim_end_matches('/').to_owned();
        self.limiters
            .lock()
            .expect("registry poisoned")
            .entry(key)
            .or_insert_with(|| Arc::new(RateLimiter::new(interval)))
            .clone()
    }
}

/// A chat-completion model reached over HTTP.
pub struct RemoteAgent {
    id: String,
    config: RemoteEndpointConfig,
    http: ureq::Agent,
    limiter: Arc<RateLimiter>,
}

enum Attempt {
    Done(AgentReply),
    Retry(String),
    Fatal(BackendError),
}

impl RemoteAgent {
    pub fn new(id: impl Into<String>, config: RemoteEndpointConfig, limiter: Arc<RateLimiter>) -> Self {
        let http = ureq::AgentBuilder::new()
            .timeout(Duration::from_millis(config.request_timeout_ms))
            .build();
        Self {
            id: id.into(),
            config,
            http,
            limiter,
        }
    }

    pub fn config(&self) -> &RemoteEndpointConfig {
        &self.config
    }

    /// The JSON body sent for `request`.
    pub fn payload(&self, request: &ChatRequest) -> Value {
        let messages: Vec<ChatMessage> = if self.config.fold_system_prompt {
            fold_system_prompt(&request.messages)
        } else {
            request.messages.clone()
        };
        json!({
            "model": self.config.model_name,
            "messages": messages,
            "temperature": request.temperature.unwrap_or(self.config.temperature),
        })
    }

    fn attempt(&self, body: &Value, token: Option<&str>) -> Attempt {
        self.limiter.acquire();
        let mut req = self.http.post(&self.config.endpoint());
        if let Some(token) = token {
            req = req.set("Authorization", &format!("Bearer {token}"));
        }
        match req.send_json(body) {
            Ok(resp) => match resp.into_json::<Value>() {
                Ok(v) => match decode_completion(&v) {
                    Ok(reply) => Attempt::Done(reply),
                    Err(e) => Attempt::Fatal(e),
                },
                Err(e) => Attempt::Fatal(BackendError::MalformedProviderResponse(e.to_string())),
            },
            Err(ureq::Error::Status(code, resp)) => {
                let detail = resp.into_string().unwrap_or_default();
                if code == 429 || code >= 500 {
                    Attempt::Retry(format!("HTTP {code}"))
                } else {
                    Attempt::Fatal(BackendError::BackendUnavailable(format!(
                        "HTTP {code}: {}",
                        detail.chars().take(200).collect::<String>()
                    )))
                }
            }
            Err(ureq::Error::Transport(t)) => Attempt::Retry(t.to_string()),
        }
    }

    fn backoff(&self, retry: u32) -> Duration {
        let base = self.config.min_retry_backoff_ms as f64 * 2f64.powi(retry as i32);
        let jitter = 1.0 + rand::thread_rng().gen_range(0.0..0.25);
        Duration::from_millis((base * jitter) as u64).min(MAX_BACKOFF)
    }
}

impl Agent for RemoteAgent {
    fn id(&self) -> &str {
        &self.id
    }

    fn kind(&self) -> BackendKind {
        BackendKind::RemoteLlm
    }

    fn respond(&self, request: &ChatRequest) -> Result<AgentReply, BackendError> {
        let token = if self.config.auth_env_var.is_empty() {
            None
        } else {
            Some(std::env::var(&self.config.auth_env_var).map_err(|_| {
                BackendError::BackendUnavailable(format!(
                    "credential variable {} is not set",
                    self.config.auth_env_var
                ))
            })?)
        };
        let body = self.payload(request);
        let mut retries = 0;
        loop {
            match self.attempt(&body, token.as_deref()) {
                Attempt::Done(mut reply) => {
                    reply.retries = retries;
                    return Ok(reply);
                }
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(reason) => {
                    if retries >= self.config.max_retries {
                        return Err(BackendError::BackendUnavailable(format!(
                            "{reason} after {retries} retries"
                        )));
                    }
                    thread::sleep(self.backoff(retries));
                    retries += 1;
                }
            }
        }
    }
}

fn decode_completion(v: &Value) -> Result<AgentReply, BackendError> {
    let content = v
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| {
            BackendError::MalformedProviderResponse("missing choices[0].message.content".into())
        })?;
    let token_count = v
        .pointer("/usage/completion_tokens")
        .and_then(Value::as_u64);
    Ok(AgentReply {
        content: content.to_owned(),
        token_count,
        retries: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::ChatMessage;

    #[test]
    fn decodes_choice_and_usage() {
        let v = json!({"choices": [{"message": {"role": "assistant", "content": "hi"}}],
                       "usage": {"completion_tokens": 3}});
        let r = decode_completion(&v).unwrap();
        assert_eq!((r.content.as_str(), r.token_count), ("hi", Some(3)));
        let v = json!({"choices": [{"message": {"content": "x"}}]});
        assert_eq!(decode_completion(&v).unwrap().token_count, None);
        assert!(matches!(
            decode_completion(&json!({"choices": []})),
            Err(BackendError::MalformedProviderResponse(_))
        ));
    }

    #[test]
    fn payload_folds_system_when_flagged() {
        let mut cfg = RemoteEndpointConfig::new("http://localhost:1", "m");
        cfg.fold_system_prompt = true;
        let agent = RemoteAgent::new("r", cfg, Arc::new(RateLimiter::new(Duration::ZERO)));
        let req = ChatRequest::new(vec![ChatMessage::system("S"), ChatMessage::user("U")]);
        let p = agent.payload(&req);
        assert_eq!(p["messages"].as_array().unwrap().len(), 1);
        assert_eq!(p["messages"][0]["role"], "user");
        assert_eq!(p["messages"][0]["content"], "S\n\nU");
        assert_eq!(p["temperature"], 1.0);
        assert_eq!(agent.payload(&req.with_temperature(0.5))["temperature"], 0.5);
    }

    #[test]
    fn registry_shares_limiters_per_endpoint() {
        let reg = RateLimiterRegistry::default();
        let a = reg.limiter_for("http://x/", Duration::ZERO);
        let b = reg.limiter_for("http://x", Duration::ZERO);
        let c = reg.limiter_for("http://y", Duration::ZERO);
        assert!(Arc::ptr_eq(&a, &b));
        assert!(!Arc::ptr_eq(&a, &c));
    }

    #[test]
    fn limiter_spaces_admissions() {
        let lim = RateLimiter::new(Duration::from_millis(20));
        let t0 = Instant::now();
        for _ in 0..3 {
            lim.acquire();
        }
        assert!(t0.elapsed() >= Duration::from_millis(40));
    }
}

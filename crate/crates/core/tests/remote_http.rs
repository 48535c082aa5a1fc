use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use mazecollab::agents::{Agent, BackendError, ChatRequest, RateLimiter, RemoteAgent, RemoteEndpointConfig};
use mazecollab::protocol::ChatMessage;
use serde_json::Value;

struct Captured {
    headers: Vec<String>,
    body: Value,
}

/// Serves one canned (status, body) per connection and returns what it received.
fn serve(responses: Vec<(u16, String)>) -> (String, thread::JoinHandle<Vec<Captured>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let handle = thread::spawn(move || {
        let mut seen = Vec::new();
        for (status, body) in responses {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut headers = Vec::new();
            let mut len = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end().to_owned();
                if line.is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                headers.push(line);
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            seen.push(Captured {
                headers,
                body: serde_json::from_slice(&buf).unwrap(),
            });
            let reason = if status == 200 { "OK" } else { "Error" };
            write!(
                stream,
                "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
            stream.flush().unwrap();
        }
        seen
    });
    (url, handle)
}

fn agent(url: &str, auth_env_var: &str) -> RemoteAgent {
    let mut cfg = RemoteEndpointConfig::new(url, "test-model");
    cfg.min_retry_backoff_ms = 1;
    cfg.max_retries = 3;
    cfg.request_timeout_ms = 5_000;
    cfg.auth_env_var = auth_env_var.to_owned();
    RemoteAgent::new("remote", cfg, Arc::new(RateLimiter::new(Duration::ZERO)))
}

const OK_BODY: &str =
    r#"{"choices":[{"message":{"role":"assistant","content":"hello there"}}],"usage":{"completion_tokens":2}}"#;

#[test]
fn retries_rate_limits_then_succeeds() {
    std::env::set_var("MAZECOLLAB_TEST_TOKEN", "sekrit");
    let (url, server) = serve(vec![
        (429, "{}".into()),
        (429, "{}".into()),
        (200, OK_BODY.into()),
    ]);
    let a = agent(&url, "MAZECOLLAB_TEST_TOKEN");
    let req = ChatRequest::new(vec![ChatMessage::system("sys"), ChatMessage::user("hi")]).with_temperature(0.5);
    let reply = a.respond(&req).unwrap();
    assert_eq!(reply.content, "hello there");
    assert_eq!(reply.token_count, Some(2));
    assert_eq!(reply.retries, 2);

    let seen = server.join().unwrap();
    assert_eq!(seen.len(), 3);
    for c in &seen {
        assert_eq!(c.body["model"], "test-model");
        assert_eq!(c.body["temperature"], 0.5);
        assert_eq!(c.body["messages"][0]["role"], "system");
        assert_eq!(c.body["messages"][1]["content"], "hi");
        assert!(c
            .headers
            .iter()
            .any(|h| h.eq_ignore_ascii_case("authorization: Bearer sekrit")));
    }
}

#[test]
fn gives_up_after_max_retries() {
    let (url, server) = serve(vec![(503, "{}".into()); 4]);
    let err = agent(&url, "").respond(&ChatRequest::new(vec![ChatMessage::user("hi")])).unwrap_err();
    assert!(matches!(err, BackendError::BackendUnavailable(ref m) if m.contains("after 3 retries")), "{err}");
    let seen = server.join().unwrap();
    assert_eq!(seen.len(), 4);
    assert_eq!(seen[0].body["temperature"], 1.0);
    assert!(!seen[0].headers.iter().any(|h| h.to_ascii_lowercase().starts_with("authorization")));
}

#[test]
fn client_errors_are_not_retried() {
    let (url, server) = serve(vec![(400, r#"{"error":"bad"}"#.into())]);
    let err = agent(&url, "").respond(&ChatRequest::new(vec![ChatMessage::user("hi")])).unwrap_err();
    assert!(matches!(err, BackendError::BackendUnavailable(ref m) if m.contains("400")), "{err}");
    assert_eq!(server.join().unwrap().len(), 1);
}

#[test]
fn malformed_success_body_is_reported() {
    let (url, server) = serve(vec![(200, r#"{"choices":[]}"#.into())]);
    let err = agent(&url, "").respond(&ChatRequest::new(vec![ChatMessage::user("hi")])).unwrap_err();
    assert!(matches!(err, BackendError::MalformedProviderResponse(_)));
    server.join().unwrap();
}

#[test]
fn missing_credential_fails_before_any_request() {
    let a = agent("http://127.0.0.1:9", "MAZECOLLAB_TEST_UNSET_VARIABLE");
    let err = a.respond(&ChatRequest::new(vec![ChatMessage::user("hi")])).unwrap_err();
    assert!(matches!(err, BackendError::BackendUnavailable(ref m) if m.contains("MAZECOLLAB_TEST_UNSET_VARIABLE")));
}

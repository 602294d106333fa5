//! Bundled mock toxicity API.
//!
//! Serves scores from a fixture file mapping text to score, over the same
//! wire format the client speaks: `POST {"text": "..."}` answered with
//! `{"score": <real>}` (or the nested Perspective-style shape when spawned
//! in that profile). Supports injected failures and bearer-token checks for
//! exercising the client's retry and auth paths.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use crate::error::CliError;

#[derive(Debug, Clone, Default)]
pub struct MockApiConfig {
    /// Exact text to score.
    pub fixture: BTreeMap<String, f64>,
    /// Respond 500 to this many requests before behaving.
    pub fail_first: usize,
    /// When set, requests must carry `Authorization: Bearer <token>`.
    pub require_bearer: Option<String>,
    /// Speak the Perspective-style request/response shape.
    pub perspective: bool,
}

pub struct MockApiServer {
    addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    served: Arc<AtomicUsize>,
    handle: Option<JoinHandle<()>>,
}

impl MockApiServer {
    /// Bind an ephemeral localhost port.
    pub fn spawn(config: MockApiConfig) -> std::io::Result<Self> {
        Self::spawn_at("127.0.0.1:0", config)
    }

    pub fn spawn_at(addr: &str, config: MockApiConfig) -> std::io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        let addr = listener.local_addr()?;
        let shutdown = Arc::new(AtomicBool::new(false));
        let served = Arc::new(AtomicUsize::new(0));
        let state = Arc::new(ServerState {
            config,
            shutdown: shutdown.clone(),
            served: served.clone(),
            failures_injected: AtomicUsize::new(0),
        });
        let handle = std::thread::spawn(move || accept_loop(listener, state));
        Ok(Self {
            addr,
            shutdown,
            served,
            handle: Some(handle),
        })
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Requests answered so far (including injected failures).
    pub fn served(&self) -> usize {
        self.served.load(Ordering::SeqCst)
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        // Unblock the accept loop.
        let _ = TcpStream::connect(self.addr);
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

impl Drop for MockApiServer {
    fn drop(&mut self) {
        self.stop();
    }
}

struct ServerState {
    config: MockApiConfig,
    shutdown: Arc<AtomicBool>,
    served: Arc<AtomicUsize>,
    failures_injected: AtomicUsize,
}

fn accept_loop(listener: TcpListener, state: Arc<ServerState>) {
    loop {
        let stream = match listener.accept() {
            Ok((stream, _)) => stream,
            Err(_) => continue,
        };
        if state.shutdown.load(Ordering::SeqCst) {
            return;
        }
        let state = state.clone();
        std::thread::spawn(move || {
            let _ = handle_connection(stream, &state);
        });
    }
}

struct Request {
    method: String,
    headers: Vec<(String, String)>,
    body: Vec<u8>,
}

fn read_request(stream: &mut TcpStream) -> std::io::Result<Request> {
    let mut buffer = Vec::new();
    let mut chunk = [0u8; 1024];
    let header_end = loop {
        if let Some(pos) = find_header_end(&buffer) {
            break pos;
        }
        let n = stream.read(&mut chunk)?;
        if n == 0 {
            return Err(std::io::Error::new(
                std::io::ErrorKind::UnexpectedEof,
                "connection closed mid-headers",
            ));
        }
        buffer.extend_from_slice(&chunk[..n]);
    };

    let head = String::from_utf8_lossy(&buffer[..header_end]).to_string();
    let mut lines = head.split("\r\n");
    let request_line = lines.next().unwrap_or_default();
    let method = request_line
        .split_whitespace()
        .next()
        .unwrap_or_default()
        .to_string();
    let headers: Vec<(String, String)> = lines
        .filter_map(|line| {
            line.split_once(':')
                .map(|(k, v)| (k.trim().to_ascii_lowercase(), v.trim().to_string()))
        })
        .collect();
    let content_length: usize = headers
        .iter()
        .find(|(k, _)| k == "content-length")
        .and_then(|(_, v)| v.parse().ok())
        .unwrap_or(0);

    let mut body = buffer[header_end + 4..].to_vec();
    while body.len() < content_length {
        let n = stream.read(&mut chunk)?;
        if n == 0 {
            break;
        }
        body.extend_from_slice(&chunk[..n]);
    }
    body.truncate(content_length);
    Ok(Request {
        method,
        headers,
        body,
    })
}

fn find_header_end(buffer: &[u8]) -> Option<usize> {
    buffer.windows(4).position(|w| w == b"\r\n\r\n")
}

fn handle_connection(mut stream: TcpStream, state: &ServerState) -> std::io::Result<()> {
    let request = read_request(&mut stream)?;
    state.served.fetch_add(1, Ordering::SeqCst);
    let (status, body) = respond(&request, state);
    let response = format!(
        "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len(),
    );
    stream.write_all(response.as_bytes())?;
    stream.flush()
}

fn respond(request: &Request, state: &ServerState) -> (&'static str, String) {
    if request.method != "POST" {
        return ("405 Method Not Allowed", r#"{"error": "POST only"}"#.into());
    }
    if let Some(expected) = &state.config.require_bearer {
        let authorized = request
            .headers
            .iter()
            .any(|(k, v)| k == "authorization" && v == &format!("Bearer {expected}"));
        if !authorized {
            return ("401 Unauthorized", r#"{"error": "bad token"}"#.into());
        }
    }
    let injected = state
        .failures_injected
        .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| {
            (n < state.config.fail_first).then_some(n + 1)
        });
    if injected.is_ok() {
        return (
            "500 Internal Server Error",
            r#"{"error": "injected failure"}"#.into(),
        );
    }

    let parsed: serde_json::Value = match serde_json::from_slice(&request.body) {
        Ok(v) => v,
        Err(_) => return ("400 Bad Request", r#"{"error": "invalid JSON"}"#.into()),
    };
    let text = if state.config.perspective {
        parsed
            .get("comment")
            .and_then(|c| c.get("text"))
            .and_then(|t| t.as_str())
    } else {
        parsed.get("text").and_then(|t| t.as_str())
    };
    let Some(text) = text else {
        return ("400 Bad Request", r#"{"error": "missing text"}"#.into());
    };
    let Some(&score) = state.config.fixture.get(text) else {
        return (
            "404 Not Found",
            r#"{"error": "text not in fixture"}"#.into(),
        );
    };
    let body = if state.config.perspective {
        format!(
            r#"{{"attributeScores": {{"TOXICITY": {{"summaryScore": {{"value": {score}}}}}}}}}"#
        )
    } else {
        format!(r#"{{"score": {score}}}"#)
    };
    ("200 OK", body)
}

/// Load a fixture file: a JSON object mapping text to score.
pub fn load_fixture(path: &Path) -> Result<BTreeMap<String, f64>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read fixture {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let serde_json::Value::Object(map) = value else {
        return Err(CliError::config(format!(
            "{}: fixture must be a JSON object mapping text to score",
            path.display()
        )));
    };
    map.into_iter()
        .map(|(text, v)| {
            v.as_f64()
                .map(|score| (text.clone(), score))
                .ok_or_else(|| {
                    CliError::config(format!("fixture score for '{text}' is not a number"))
                })
        })
        .collect()
}

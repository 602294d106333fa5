//! HTTP client for toxicity scoring, with retries, score clamping, and a
//! switchable request/response profile.
//!
//! The `simple` profile is the bundled wire format: `POST {"text": "..."}`
//! answered by `{"score": <real>}`, bearer-token auth. The `perspective`
//! profile speaks the Perspective API shapes (comment/requestedAttributes
//! request, attributeScores response, key passed as a query parameter).

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use crate::config::ToxicitySection;
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApiProfile {
    #[default]
    Simple,
    Perspective,
}

#[derive(Debug, thiserror::Error)]
pub enum ToxicityError {
    #[error("network error: {0}")]
    Network(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("malformed response: {0}")]
    Malformed(String),
}

/// A parsed score, clamped into `[0, 1]`; `clamped` flags out-of-range
/// values from the server.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredText {
    pub score: f64,
    pub clamped: bool,
}

pub struct ToxicityClient {
    agent: ureq::Agent,
    endpoint: String,
    token: Option<String>,
    retries: u32,
    profile: ApiProfile,
    max_in_flight: usize,
}

impl ToxicityClient {
    /// Build from the config section, resolving the token environment
    /// variable named there.
    pub fn from_section(section: &ToxicitySection) -> Result<Self, CliError> {
        let token = match &section.token_env {
            None => None,
            Some(var) => Some(std::env::var(var).map_err(|_| {
                CliError::config(format!(
                    "toxicity.token_env: environment variable '{var}' is not set"
                ))
            })?),
        };
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(section.timeout_ms)))
            .http_status_as_error(false)
            .build();
        Ok(Self {
            agent: config.into(),
            endpoint: section.endpoint.clone(),
            token,
            retries: section.retries,
            profile: section.profile,
            max_in_flight: section.max_in_flight.max(1),
        })
    }

    fn request_parts(&self, text: &str) -> (String, serde_json::Value) {
        match self.profile {
            ApiProfile::Simple => (self.endpoint.clone(), serde_json::json!({ "text": text })),
            ApiProfile::Perspective => {
                let url = match &self.token {
                    Some(key) => format!("{}?key={key}", self.endpoint),
                    None => self.endpoint.clone(),
                };
                (
                    url,
                    serde_json::json!({
                        "comment": { "text": text },
                        "requestedAttributes": { "TOXICITY": {} },
                    }),
                )
            }
        }
    }

    fn parse_score(&self, body: &str) -> Result<f64, ToxicityError> {
        let value: serde_json::Value =
            serde_json::from_str(body).map_err(|e| ToxicityError::Malformed(e.to_string()))?;
        let score = match self.profile {
            ApiProfile::Simple => value.get("score").and_then(|s| s.as_f64()),
            ApiProfile::Perspective => value
                .get("attributeScores")
                .and_then(|a| a.get("TOXICITY"))
                .and_then(|t| t.get("summaryScore"))
                .and_then(|s| s.get("value"))
                .and_then(|v| v.as_f64()),
        };
        match score {
            Some(s) if s.is_finite() => Ok(s),
            Some(s) => Err(ToxicityError::Malformed(format!("non-finite score {s}"))),
            None => Err(ToxicityError::Malformed(format!(
                "no score field in response: {body}"
            ))),
        }
    }

    /// Score one text, retrying transport failures and 5xx responses.
    pub fn score(&self, text: &str) -> Result<ScoredText, ToxicityError> {
        let (url, body) = self.request_parts(text);
        let mut last_failure = String::new();
        for _attempt in 0..=self.retries {
            let mut request = self.agent.post(&url);
            if self.profile == ApiProfile::Simple {
                if let Some(token) = &self.token {
                    request = request.header("Authorization", &format!("Bearer {token}"));
                }
            }
            match request.send_json(&body) {
                Err(e) => last_failure = e.to_string(),
                Ok(mut response) => {
                    let status = response.status().as_u16();
                    match status {
                        401 | 403 => {
                            return Err(ToxicityError::Auth(format!("server returned {status}")))
                        }
                        500..=599 => last_failure = format!("server returned {status}"),
                        200..=299 => {
                            let text_body = response
                                .body_mut()
                                .read_to_string()
                                .map_err(|e| ToxicityError::Network(e.to_string()))?;
                            let raw = self.parse_score(&text_body)?;
                            return Ok(ScoredText {
                                score: raw.clamp(0.0, 1.0),
                                clamped: !(0.0..=1.0).contains(&raw),
                            });
                        }
                        other => {
                            return Err(ToxicityError::Network(format!(
                                "unexpected status {other}"
                            )))
                        }
                    }
                }
            }
        }
        Err(ToxicityError::Network(format!(
            "{last_failure} (after {} attempts)",
            self.retries + 1
        )))
    }

    /// Score many texts with bounded concurrency.
    ///
    /// Results are matched to inputs by index, never by arrival order; the
    /// first failing index wins when several requests fail.
    pub fn score_many(&self, texts: &[String]) -> Result<Vec<ScoredText>, ToxicityError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let next = AtomicUsize::new(0);
        let results: Vec<Mutex<Option<Result<ScoredText, ToxicityError>>>> =
            texts.iter().map(|_| Mutex::new(None)).collect();
        let workers = self.max_in_flight.min(texts.len());
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let index = next.fetch_add(1, Ordering::SeqCst);
                    if index >= texts.len() {
                        break;
                    }
                    let outcome = self.score(&texts[index]);
                    *results[index].lock().expect("result slot") = Some(outcome);
                });
            }
        });
        results
            .into_iter()
            .map(|slot| {
                slot.into_inner()
                    .expect("poisoned")
                    .expect("worker filled slot")
            })
            .collect()
    }
}

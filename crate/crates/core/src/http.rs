//! Blocking JSON-over-HTTP with bounded retries.

use std::time::Duration;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    /// Total attempts including the first one.
    pub max_attempts: u32,
    /// Delay before the second attempt; doubles for each later one.
    #[serde(with = "millis")]
    pub backoff_base: Duration,
    #[serde(with = "millis")]
    pub timeout: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            backoff_base: Duration::from_millis(250),
            timeout: Duration::from_secs(30),
        }
    }
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_millis)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum HttpFailure {
    Transport(String),
    Status { status: u16, body: String },
}

const EXCERPT_CHARS: usize = 200;

pub(crate) fn excerpt(body: &str) -> String {
    let mut s: String = body.chars().take(EXCERPT_CHARS).collect();
    if body.chars().count() > EXCERPT_CHARS {
        s.push_str("...");
    }
    s
}

pub(crate) fn agent(policy: &RetryPolicy) -> ureq::Agent {
    ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(policy.timeout))
        .build()
        .into()
}

fn transient(f: &HttpFailure) -> bool {
    match f {
        HttpFailure::Transport(_) => true,
        HttpFailure::Status { status, .. } => *status == 429 || *status >= 500,
    }
}

fn post_once(
    agent: &ureq::Agent,
    url: &str,
    bearer: Option<&str>,
    body: &serde_json::Value,
) -> Result<String, HttpFailure> {
    let mut req = agent.post(url).header("Content-Type", "application/json");
    if let Some(key) = bearer {
        req = req.header("Authorization", &format!("Bearer {key}"));
    }
    let mut resp = req
        .send_json(body)
        .map_err(|e| HttpFailure::Transport(e.to_string()))?;
    let status = resp.status().as_u16();
    let text = resp
        .body_mut()
        .read_to_string()
        .map_err(|e| HttpFailure::Transport(e.to_string()))?;
    if (200..300).contains(&status) {
        Ok(text)
    } else {
        Err(HttpFailure::Status { status, body: excerpt(&text) })
    }
}

/// POSTs `body`, retrying transport failures and 429/5xx responses with
/// exponential backoff. Returns the response text of the first 2xx reply.
pub(crate) fn post_json(
    agent: &ureq::Agent,
    url: &str,
    bearer: Option<&str>,
    body: &serde_json::Value,
    policy: &RetryPolicy,
) -> Result<String, HttpFailure> {
    let attempts = policy.max_attempts.max(1);
    let mut delay = policy.backoff_base;
    let mut attempt = 1;
    loop {
        match post_once(agent, url, bearer, body) {
            Ok(text) => return Ok(text),
            Err(f) if attempt < attempts && transient(&f) => {
                log::debug!("attempt {attempt}/{attempts} to {url} failed: {f:?}");
                std::thread::sleep(delay);
                delay = delay.saturating_mul(2);
                attempt += 1;
            }
            Err(f) => return Err(f),
        }
    }
}

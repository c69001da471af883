//! Chat-completions transport with retry, request limiting and an
//! append-only audit log.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "user".into(),
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "assistant".into(),
            content: content.into(),
        }
    }
}

/// One HTTP attempt: the status (absent on transport errors) and the raw
/// body or error text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub status: Option<u16>,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Exchange {
    pub attempts: Vec<Attempt>,
    /// Assistant content of the final successful attempt.
    pub content: Option<String>,
}

pub trait ChatTransport: Send + Sync {
    fn send(&self, body: &Value) -> Exchange;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl RetryPolicy {
    /// Delay before retry number `retry` (0-based): `base * 2^retry`, capped.
    pub fn delay(&self, retry: u32) -> Duration {
        self.base_delay
            .checked_mul(1u32 << retry.min(20))
            .unwrap_or(self.max_delay)
            .min(self.max_delay)
    }
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 5,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(30),
        }
    }
}

/// Caps concurrent requests and spaces request starts by `min_interval`.
#[derive(Debug)]
pub struct RequestLimiter {
    max_in_flight: usize,
    in_flight: Mutex<usize>,
    freed: Condvar,
    min_interval: Duration,
    last_start: Mutex<Option<Instant>>,
}

pub struct Permit<'a> {
    limiter: &'a RequestLimiter,
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self
            .limiter
            .in_flight
            .lock()
            .unwrap_or_else(|e| e.into_inner());
        *n -= 1;
        self.limiter.freed.notify_one();
    }
}

impl RequestLimiter {
    pub fn new(max_in_flight: usize, min_interval: Duration) -> Self {
        RequestLimiter {
            max_in_flight: max_in_flight.max(1),
            in_flight: Mutex::new(0),
            freed: Condvar::new(),
            min_interval,
            last_start: Mutex::new(None),
        }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut n = self.in_flight.lock().unwrap_or_else(|e| e.into_inner());
        while *n >= self.max_in_flight {
            n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n += 1;
        drop(n);
        let mut last = self.last_start.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(prev) = *last {
            let ready = prev + self.min_interval;
            let now = Instant::now();
            if ready > now {
                std::thread::sleep(ready - now);
            }
        }
        *last = Some(Instant::now());
        Permit { limiter: self }
    }

    pub fn in_flight(&self) -> usize {
        *self.in_flight.lock().unwrap_or_else(|e| e.into_inner())
    }
}

/// Blocking client for `POST {base_url}/chat/completions`.
pub struct HttpChatClient {
    http: ureq::Agent,
    url: String,
    api_key: Option<String>,
    retry: RetryPolicy,
    limiter: RequestLimiter,
}

impl HttpChatClient {
    pub fn new(
        base_url: &str,
        api_key: Option<String>,
        retry: RetryPolicy,
        limiter: RequestLimiter,
        timeout: Duration,
    ) -> Self {
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build();
        HttpChatClient {
            http: config.into(),
            url: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            api_key,
            retry,
            limiter,
        }
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    fn attempt(&self, body: &Value) -> std::result::Result<(u16, String), String> {
        let _permit = self.limiter.acquire();
        let mut req = self
            .http
            .post(&self.url)
            .header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send(body.to_string()).map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| e.to_string())?;
        Ok((status, text))
    }
}

/// Assistant text from a chat-completions response body.
pub fn extract_content(body: &str) -> Option<String> {
    let v: Value = serde_json::from_str(body).ok()?;
    v.pointer("/choices/0/message/content")?
        .as_str()
        .map(str::to_string)
}

fn retryable(status: u16) -> bool {
    status == 408 || status == 429 || status >= 500
}

impl ChatTransport for HttpChatClient {
    fn send(&self, body: &Value) -> Exchange {
        let mut attempts = Vec::new();
        for i in 0..self.retry.max_attempts {
            if i > 0 {
                std::thread::sleep(self.retry.delay(i - 1));
            }
            match self.attempt(body) {
                Ok((status, text)) => {
                    let content = (status == 200).then(|| extract_content(&text)).flatten();
                    attempts.push(Attempt {
                        status: Some(status),
                        body: text,
                    });
                    if content.is_some() {
                        return Exchange { attempts, content };
                    }
                    if !retryable(status) {
                        break;
                    }
                }
                Err(e) => attempts.push(Attempt {
                    status: None,
                    body: e,
                }),
            }
        }
        Exchange {
            attempts,
            content: None,
        }
    }
}

pub fn request_body(model: &str, temperature: f64, messages: &[ChatMessage]) -> Value {
    json!({
        "model": model,
        "temperature": temperature,
        "messages": messages,
    })
}

/// Per-session JSONL log of every raw request and response.
#[derive(Debug, Clone)]
pub struct AuditLog {
    path: PathBuf,
}

impl AuditLog {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        AuditLog { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn record(&self, entry: &Value) -> Result<()> {
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| Error::io(&self.path, e))?;
        writeln!(f, "{entry}").map_err(|e| Error::io(&self.path, e))
    }

    pub fn read(&self) -> Result<Vec<Value>> {
        let text = std::fs::read_to_string(&self.path).map_err(|e| Error::io(&self.path, e))?;
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(Error::from))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    #[test]
    fn backoff_doubles_and_caps() {
        let p = RetryPolicy {
            max_attempts: 5,
            base_delay: Duration::from_millis(100),
            max_delay: Duration::from_millis(350),
        };
        assert_eq!(p.delay(0), Duration::from_millis(100));
        assert_eq!(p.delay(1), Duration::from_millis(200));
        assert_eq!(p.delay(2), Duration::from_millis(350));
        assert_eq!(p.delay(40), Duration::from_millis(350));
    }

    #[test]
    fn content_extraction() {
        let body = r#"{"choices":[{"message":{"role":"assistant","content":"Option B"}}]}"#;
        assert_eq!(extract_content(body).as_deref(), Some("Option B"));
        assert_eq!(extract_content("{}"), None);
        assert_eq!(extract_content("not json"), None);
    }

    #[test]
    fn limiter_caps_concurrency() {
        let limiter = Arc::new(RequestLimiter::new(2, Duration::ZERO));
        let peak = Arc::new(Mutex::new(0usize));
        let handles: Vec<_> = (0..6)
            .map(|_| {
                let limiter = Arc::clone(&limiter);
                let peak = Arc::clone(&peak);
                std::thread::spawn(move || {
                    let _p = limiter.acquire();
                    let now = limiter.in_flight();
                    let mut pk = peak.lock().unwrap();
                    *pk = (*pk).max(now);
                    drop(pk);
                    std::thread::sleep(Duration::from_millis(20));
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert!(*peak.lock().unwrap() <= 2);
        assert_eq!(limiter.in_flight(), 0);
    }
}

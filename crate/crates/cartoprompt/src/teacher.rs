//! Chat-completion client for the teacher model.

use std::time::Duration;

use cartoprompt_core::curate::{ChatMessage, CurationJob, TeacherEndpoint};
use serde_json::{json, Value};
use tokio::time::{sleep, Instant};

use crate::error::{Error, Result};
use crate::overpass::classify;

/// Spaces consecutive requests at least `60 / rpm` seconds apart.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next: Option<Instant>,
}

impl RateLimiter {
    pub fn per_minute(rpm: f64) -> Self {
        Self {
            interval: Duration::from_secs_f64(60.0 / rpm),
            next: None,
        }
    }

    pub fn interval(&self) -> Duration {
        self.interval
    }

    pub async fn acquire(&mut self) {
        if let Some(at) = self.next {
            sleep_until(at).await;
        }
        self.next = Some(Instant::now() + self.interval);
    }
}

async fn sleep_until(at: Instant) {
    let now = Instant::now();
    if at > now {
        sleep(at - now).await;
    }
}

/// Whether a failed request is worth repeating.
pub fn is_retryable(e: &Error) -> bool {
    match e {
        Error::Transport(_) | Error::Timeout { .. } => true,
        Error::HttpStatus { status, .. } => *status == 429 || *status >= 500,
        _ => false,
    }
}

/// Delay before retry number `attempt` (0-based): `base · 2^attempt`.
pub fn backoff(base_ms: u64, attempt: u32) -> Duration {
    Duration::from_millis(base_ms.saturating_mul(1u64 << attempt.min(20)))
}

pub struct TeacherClient {
    http: reqwest::Client,
    endpoint: TeacherEndpoint,
    token: Option<String>,
    temperature: f64,
    timeout: Duration,
    limiter: RateLimiter,
}

/// Outcome of one logical request including its retries.
#[derive(Debug)]
pub struct Reply {
    pub result: Result<String>,
    pub attempts: u32,
}

impl TeacherClient {
    /// The bearer token is read from the environment variable named in the
    /// endpoint; none is sent when it is unset.
    pub fn new(job: &CurationJob, timeout: Duration) -> Result<Self> {
        let token = std::env::var(&job.teacher.token_env)
            .ok()
            .filter(|t| !t.is_empty());
        Ok(Self {
            http: reqwest::Client::builder().timeout(timeout).build()?,
            endpoint: job.teacher.clone(),
            token,
            temperature: job.temperature,
            timeout,
            limiter: RateLimiter::per_minute(job.requests_per_minute),
        })
    }

    pub fn has_token(&self) -> bool {
        self.token.is_some()
    }

    /// One POST, rate limited, no retry. Returns the first choice's content.
    pub async fn chat(&mut self, messages: &[ChatMessage]) -> Result<String> {
        self.limiter.acquire().await;
        let body = json!({
            "model": self.endpoint.model,
            "messages": messages,
            "temperature": self.temperature,
        });
        let mut req = self
            .http
            .post(&self.endpoint.url)
            .header("content-type", "application/json")
            .body(body.to_string());
        if let Some(t) = &self.token {
            req = req.bearer_auth(t);
        }
        let url = self.endpoint.url.as_str();
        let resp = req.send().await.map_err(|e| classify(e, url, self.timeout))?;
        let status = resp.status();
        let text = resp
            .text()
            .await
            .map_err(|e| classify(e, url, self.timeout))?;
        if !status.is_success() {
            return Err(Error::HttpStatus {
                status: status.as_u16(),
                url: url.to_string(),
                body: text.chars().take(500).collect(),
            });
        }
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("teacher reply is not JSON: {e}")))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| Error::Format("teacher reply has no choices[0].message.content".into()))
    }

    /// [`chat`](Self::chat) with up to `max_retries` exponential-backoff
    /// retries on transport errors, timeouts, 429 and 5xx.
    pub async fn chat_with_retries(
        &mut self,
        messages: &[ChatMessage],
        max_retries: u32,
        backoff_base_ms: u64,
    ) -> Reply {
        let mut attempt = 0;
        loop {
            let result = self.chat(messages).await;
            attempt += 1;
            match result {
                Err(e) if is_retryable(&e) && attempt <= max_retries => {
                    let delay = backoff(backoff_base_ms, attempt - 1);
                    tracing::warn!(error = %e, attempt, delay_ms = delay.as_millis() as u64, "teacher request failed, retrying");
                    sleep(delay).await;
                }
                result => {
                    return Reply {
                        result,
                        attempts: attempt,
                    }
                }
            }
        }
    }
}

//! Chat backend abstraction. Every agent call in the toolkit goes through
//! [`Gateway`], which layers retries, a token budget, and rate limiting over
//! a [`ChatBackend`]: either a live HTTP endpoint or a scripted transcript.

mod http;
mod scripted;
mod structured;

pub use http::HttpBackend;
pub use scripted::{wildcard_match, MatchRule, ScriptedBackend, TranscriptEntry};
pub use structured::{extract_structured, StructuredParseError};

use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::count_tokens;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
}

impl ChatRequest {
    /// Single user-turn request, the shape every pipeline agent uses.
    pub fn user(model: impl Into<String>, content: impl Into<String>) -> Self {
        ChatRequest {
            model: model.into(),
            messages: vec![ChatMessage { role: Role::User, content: content.into() }],
            temperature: 0.0,
            max_tokens: None,
        }
    }

    /// Flat text view of the request, used for transcript matching and token
    /// accounting.
    pub fn rendered(&self) -> String {
        self.messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: usize,
    pub completion_tokens: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    pub usage: Usage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finish_reason: Option<String>,
}

#[derive(Debug, Error)]
pub enum GatewayError {
    /// Credentials rejected. Never retried: a second identical attempt
    /// cannot succeed and may lock the account.
    #[error("authentication rejected: {0}")]
    Auth(String),
    /// Transient failure (connection, timeout, 5xx, 429). Retried with
    /// exponential backoff.
    #[error("transport failure: {0}")]
    Transport(String),
    /// The backend answered but the payload violates the wire contract.
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("token budget exhausted: spent {spent} of {budget}")]
    BudgetExceeded { spent: usize, budget: usize },
    #[error("transcript mismatch at call {call}: {detail}")]
    TranscriptMismatch { call: usize, detail: String },
    #[error("transcript exhausted at call {call}: {detail}")]
    TranscriptExhausted { call: usize, detail: String },
    #[error("retries exhausted after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: String },
}

/// Backend abstraction: one blocking chat completion per call.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError>;
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RetryPolicy {
    /// Total attempts including the first one.
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
    /// Scales each delay by a uniform factor in [0.5, 1.5) to spread
    /// thundering herds. Off by default in tests for exact timing.
    pub jitter: bool,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 3, base_delay_ms: 1000, max_delay_ms: 30_000, jitter: true }
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct GatewayLimits {
    /// Hard ceiling on prompt+completion tokens across the gateway's life.
    pub token_budget: Option<usize>,
    pub requests_per_minute: Option<u32>,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct GatewayStats {
    /// Backend invocations, retries included.
    pub calls: u64,
    pub retries: u64,
    pub failures: u64,
    pub prompt_tokens: usize,
    pub completion_tokens: usize,
}

struct GatewayState {
    stats: GatewayStats,
    window: VecDeque<Instant>,
}

/// Policy wrapper around a [`ChatBackend`].
///
/// Retries only [`GatewayError::Transport`]; auth and protocol errors fail
/// fast. The token budget is checked before every attempt, and the rate
/// limiter sleeps until a slot opens rather than rejecting the call.
pub struct Gateway {
    backend: Box<dyn ChatBackend>,
    retry: RetryPolicy,
    limits: GatewayLimits,
    rate_window: Duration,
    state: Mutex<GatewayState>,
}

impl Gateway {
    pub fn new(backend: Box<dyn ChatBackend>, retry: RetryPolicy, limits: GatewayLimits) -> Self {
        Gateway {
            backend,
            retry,
            limits,
            rate_window: Duration::from_secs(60),
            state: Mutex::new(GatewayState { stats: GatewayStats::default(), window: VecDeque::new() }),
        }
    }

    #[cfg(test)]
    fn with_rate_window(mut self, window: Duration) -> Self {
        self.rate_window = window;
        self
    }

    pub fn stats(&self) -> GatewayStats {
        self.state.lock().expect("gateway lock poisoned").stats
    }

    pub fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let mut attempt: u32 = 1;
        loop {
            self.check_budget()?;
            self.acquire_rate_slot();
            {
                let mut state = self.state.lock().expect("gateway lock poisoned");
                state.stats.calls += 1;
            }
            match self.backend.complete(request) {
                Ok(resp) => {
                    let mut state = self.state.lock().expect("gateway lock poisoned");
                    state.stats.prompt_tokens += resp.usage.prompt_tokens;
                    state.stats.completion_tokens += resp.usage.completion_tokens;
                    return Ok(resp);
                }
                Err(GatewayError::Transport(detail)) => {
                    if attempt >= self.retry.max_attempts {
                        self.state.lock().expect("gateway lock poisoned").stats.failures += 1;
                        return Err(GatewayError::RetriesExhausted { attempts: attempt, last: detail });
                    }
                    self.state.lock().expect("gateway lock poisoned").stats.retries += 1;
                    std::thread::sleep(self.backoff_delay(attempt));
                    attempt += 1;
                }
                Err(other) => {
                    self.state.lock().expect("gateway lock poisoned").stats.failures += 1;
                    return Err(other);
                }
            }
        }
    }

    fn check_budget(&self) -> Result<(), GatewayError> {
        let Some(budget) = self.limits.token_budget else { return Ok(()) };
        let stats = self.state.lock().expect("gateway lock poisoned").stats;
        let spent = stats.prompt_tokens + stats.completion_tokens;
        if spent >= budget {
            return Err(GatewayError::BudgetExceeded { spent, budget });
        }
        Ok(())
    }

    fn acquire_rate_slot(&self) {
        let Some(rpm) = self.limits.requests_per_minute else { return };
        let rpm = rpm.max(1) as usize;
        loop {
            let wait = {
                let mut state = self.state.lock().expect("gateway lock poisoned");
                let now = Instant::now();
                while let Some(&front) = state.window.front() {
                    if now.duration_since(front) >= self.rate_window {
                        state.window.pop_front();
                    } else {
                        break;
                    }
                }
                if state.window.len() < rpm {
                    state.window.push_back(now);
                    return;
                }
                let oldest = *state.window.front().expect("window is non-empty here");
                self.rate_window.saturating_sub(now.duration_since(oldest))
            };
            // the lock is released while sleeping so other threads can queue
            std::thread::sleep(wait.max(Duration::from_millis(1)));
        }
    }

    fn backoff_delay(&self, attempt: u32) -> Duration {
        let shift = attempt.saturating_sub(1).min(16);
        let exp = self.retry.base_delay_ms.saturating_mul(1u64 << shift);
        let capped = exp.min(self.retry.max_delay_ms).max(1);
        let ms = if self.retry.jitter {
            let factor: f64 = rand::rng().random_range(0.5..1.5);
            (capped as f64 * factor).round() as u64
        } else {
            capped
        };
        Duration::from_millis(ms)
    }
}

/// Builds a [`ChatResponse`] with whitespace-token usage accounting, shared
/// by backends that do not report usage themselves.
pub(crate) fn response_with_counted_usage(rendered_prompt: &str, content: String) -> ChatResponse {
    let usage = Usage {
        prompt_tokens: count_tokens(rendered_prompt),
        completion_tokens: count_tokens(&content),
    };
    ChatResponse { content, usage, finish_reason: Some("stop".into()) }
}

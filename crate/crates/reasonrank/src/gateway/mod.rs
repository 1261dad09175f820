//! Chat-completion client with a content-addressed response cache, retries
//! and a per-session usage ledger.

mod cache;
mod http;
mod mock;

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use reasonrank_core::usage::{estimate_cost, Pricing};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use cache::{CachedExchange, ResponseCache};
pub use http::HttpTransport;
pub use mock::{MockScript, MockTransport, Policy};

use crate::error::GatewayError;

pub const API_KEY_VAR: &str = "REASONRANK_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model: String,
    pub prompt: String,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
}

impl CompletionRequest {
    pub fn new(model: impl Into<String>, prompt: impl Into<String>) -> Self {
        Self {
            model: model.into(),
            prompt: prompt.into(),
            temperature: 1.0,
            top_p: 0.9,
            max_tokens: 2048,
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(GatewayError::InvalidRequest(format!(
                "temperature {} must be >= 0",
                self.temperature
            )));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(GatewayError::InvalidRequest(format!(
                "top_p {} must be in (0, 1]",
                self.top_p
            )));
        }
        if self.model.is_empty() {
            return Err(GatewayError::InvalidRequest("empty model name".into()));
        }
        Ok(())
    }
}

/// SHA-256 over the fields that determine a completion. `max_tokens` is left
/// out: it caps the reply but does not change the sampling distribution.
pub fn cache_key(req: &CompletionRequest) -> String {
    let mut h = Sha256::new();
    for field in [req.model.as_bytes(), req.prompt.as_bytes()] {
        h.update((field.len() as u64).to_le_bytes());
        h.update(field);
    }
    h.update(req.temperature.to_bits().to_le_bytes());
    h.update(req.top_p.to_bits().to_le_bytes());
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub input_tokens: u64,
    pub output_tokens: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportReply {
    pub text: String,
    /// Provider-reported counts; `None` falls back to the approximate tokenizer.
    pub usage: Option<TokenUsage>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TransportError {
    RateLimited,
    /// Worth retrying: 5xx or a connection problem.
    Transient(String),
    Fatal(String),
}

impl std::fmt::Display for TransportError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TransportError::RateLimited => f.write_str("HTTP 429 rate limited"),
            TransportError::Transient(m) | TransportError::Fatal(m) => f.write_str(m),
        }
    }
}

pub trait Transport: Send + Sync {
    fn send(&self, req: &CompletionRequest) -> Result<TransportReply, TransportError>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub key: String,
    pub text: String,
    /// Usage of the original exchange, also for cache hits.
    pub usage: TokenUsage,
    pub from_cache: bool,
    pub attempts: u32,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionLedger {
    /// Transport attempts, retries included.
    pub requests: u64,
    pub cache_hits: u64,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatewayConfig {
    pub retries: u32,
    pub backoff: Duration,
    pub concurrency: usize,
    pub cache_only: bool,
    pub pricing: Pricing,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            retries: 3,
            backoff: Duration::from_millis(250),
            concurrency: 4,
            cache_only: false,
            pricing: Pricing::default(),
        }
    }
}

type Sleeper = Box<dyn Fn(Duration) + Send + Sync>;

pub struct Gateway {
    transport: Box<dyn Transport>,
    cache: Option<ResponseCache>,
    config: GatewayConfig,
    sleeper: Sleeper,
    ledger: Mutex<SessionLedger>,
    key_locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl Gateway {
    pub fn new(transport: Box<dyn Transport>, cache: Option<ResponseCache>, config: GatewayConfig) -> Self {
        Self {
            transport,
            cache,
            config,
            sleeper: Box::new(std::thread::sleep),
            ledger: Mutex::new(SessionLedger::default()),
            key_locks: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_sleeper(mut self, sleeper: impl Fn(Duration) + Send + Sync + 'static) -> Self {
        self.sleeper = Box::new(sleeper);
        self
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    pub fn ledger(&self) -> SessionLedger {
        *self.ledger.lock().unwrap()
    }

    fn key_lock(&self, key: &str) -> Arc<Mutex<()>> {
        self.key_locks
            .lock()
            .unwrap()
            .entry(key.to_string())
            .or_default()
            .clone()
    }

    pub fn complete(&self, req: &CompletionRequest) -> Result<Completion, GatewayError> {
        req.validate()?;
        let key = cache_key(req);
        let lock = self.key_lock(&key);
        let _guard = lock.lock().unwrap();

        if let Some(cache) = &self.cache {
            if let Some(hit) = cache.get(&key)? {
                self.ledger.lock().unwrap().cache_hits += 1;
                return Ok(Completion {
                    key,
                    text: hit.response,
                    usage: hit.usage,
                    from_cache: true,
                    attempts: 0,
                });
            }
        }
        if self.config.cache_only {
            return Err(GatewayError::OfflineCacheMiss(key));
        }

        let max_attempts = self.config.retries + 1;
        let mut attempt = 0;
        let reply = loop {
            attempt += 1;
            self.ledger.lock().unwrap().requests += 1;
            match self.transport.send(req) {
                Ok(r) => break r,
                Err(TransportError::Fatal(m)) => return Err(GatewayError::Rejected(m)),
                Err(e) if attempt >= max_attempts => {
                    return Err(GatewayError::RetriesExhausted {
                        attempts: attempt,
                        last: e.to_string(),
                    })
                }
                Err(_) => (self.sleeper)(self.config.backoff * 2u32.saturating_pow(attempt - 1)),
            }
        };

        let usage = reply.usage.unwrap_or_else(|| TokenUsage {
            input_tokens: reasonrank_core::usage::approx_tokens(&req.prompt),
            output_tokens: reasonrank_core::usage::approx_tokens(&reply.text),
        });
        {
            let mut l = self.ledger.lock().unwrap();
            l.input_tokens += usage.input_tokens;
            l.output_tokens += usage.output_tokens;
            l.cost += estimate_cost(
                usage.input_tokens as i64,
                usage.output_tokens as i64,
                &self.config.pricing,
            )
            .unwrap_or(0.0);
        }
        if let Some(cache) = &self.cache {
            cache.put(&CachedExchange {
                key: key.clone(),
                request: req.clone(),
                response: reply.text.clone(),
                usage,
            })?;
        }
        Ok(Completion {
            key,
            text: reply.text,
            usage,
            from_cache: false,
            attempts: attempt,
        })
    }

    /// Runs `jobs` with at most `concurrency` in flight; results keep input order.
    pub fn run_bounded<T, R, F>(&self, jobs: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync,
    {
        let workers = self.config.concurrency.max(1).min(jobs.len().max(1));
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<R>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= jobs.len() {
                        break;
                    }
                    let r = f(&jobs[i]);
                    *slots[i].lock().unwrap() = Some(r);
                });
            }
        });
        slots
            .into_iter()
            .map(|m| m.into_inner().unwrap().expect("every job ran"))
            .collect()
    }
}

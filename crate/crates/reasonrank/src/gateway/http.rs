use std::time::Duration;

use serde_json::{json, Value};

use super::{CompletionRequest, TokenUsage, Transport, TransportError, TransportReply, API_KEY_VAR};
use crate::error::GatewayError;

/// Chat-completions endpoint speaking the common `messages` schema.
pub struct HttpTransport {
    endpoint: String,
    api_key: String,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(endpoint: impl Into<String>, api_key: impl Into<String>, timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build();
        Self {
            endpoint: endpoint.into(),
            api_key: api_key.into(),
            agent: config.into(),
        }
    }

    pub fn from_env(endpoint: impl Into<String>, timeout: Duration) -> Result<Self, GatewayError> {
        let key = std::env::var(API_KEY_VAR).map_err(|_| GatewayError::MissingCredential)?;
        Ok(Self::new(endpoint, key, timeout))
    }
}

pub(crate) fn request_body(req: &CompletionRequest) -> Value {
    json!({
        "model": req.model,
        "messages": [{"role": "user", "content": req.prompt}],
        "temperature": req.temperature,
        "top_p": req.top_p,
        "max_tokens": req.max_tokens,
    })
}

pub(crate) fn parse_reply(body: &str) -> Result<TransportReply, TransportError> {
    let v: Value = serde_json::from_str(body)
        .map_err(|e| TransportError::Fatal(format!("response is not JSON: {e}")))?;
    let text = v
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| TransportError::Fatal("response has no choices[0].message.content".into()))?;
    let usage = match (
        v.pointer("/usage/prompt_tokens").and_then(Value::as_u64),
        v.pointer("/usage/completion_tokens").and_then(Value::as_u64),
    ) {
        (Some(i), Some(o)) => Some(TokenUsage {
            input_tokens: i,
            output_tokens: o,
        }),
        _ => None,
    };
    Ok(TransportReply {
        text: text.to_string(),
        usage,
    })
}

impl Transport for HttpTransport {
    fn send(&self, req: &CompletionRequest) -> Result<TransportReply, TransportError> {
        let resp = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .header("Content-Type", "application/json")
            .send(request_body(req).to_string());
        let mut resp = resp.map_err(|e| TransportError::Transient(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| TransportError::Transient(e.to_string()))?;
        match status {
            200..=299 => parse_reply(&body),
            429 => Err(TransportError::RateLimited),
            500..=599 => Err(TransportError::Transient(format!("HTTP {status}"))),
            _ => Err(TransportError::Fatal(format!("HTTP {status}: {body}"))),
        }
    }
}

//! Uniform chat-completion interface: an HTTP backend for hosted models,
//! offline oracle backends for testing and calibration, and a persistent
//! response cache that wraps any of them.
//!
//! Ground truth never travels inside a [`PromptSpec`]; the oracle backends
//! receive it through their constructors, on a separate channel from the
//! prompt.

mod cache;
mod http;
mod oracle;
pub mod testing;

pub use cache::{cached, prompt_digest, sha256_hex, CachedBackend, ResponseCache};
pub use http::{
    EndpointConfig, HttpChatBackend, HttpResponse, HttpTransport, ReqwestTransport, RetryPolicy,
};
pub use oracle::{NoisyOracleBackend, OracleBackend};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ranker::PromptSpec;

/// Token accounting reported by a backend.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

/// One completed chat call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub raw_text: String,
    pub usage: TokenUsage,
    pub latency_ms: u64,
}

impl Completion {
    pub fn offline(raw_text: String) -> Self {
        Completion {
            raw_text,
            usage: TokenUsage::default(),
            latency_ms: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum BackendError {
    /// Connection failures, timeouts and HTTP >= 500. Worth retrying.
    #[error("transport error: {detail}")]
    Transport { detail: String },

    /// HTTP 4xx and configuration problems. Retrying cannot help.
    #[error("fatal backend error{}: {detail}", status.map(|s| format!(" (HTTP {s})")).unwrap_or_default())]
    Fatal { status: Option<u16>, detail: String },
}

impl BackendError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, BackendError::Transport { .. })
    }

    pub fn transport(detail: impl Into<String>) -> Self {
        BackendError::Transport {
            detail: detail.into(),
        }
    }

    pub fn fatal(detail: impl Into<String>) -> Self {
        BackendError::Fatal {
            status: None,
            detail: detail.into(),
        }
    }
}

/// A chat-completion backend. Mock backends are deterministic per
/// (`backend_id`, prompt, decoding seed).
pub trait ChatBackend: Send + Sync {
    fn backend_id(&self) -> &str;

    /// Model identifier recorded in provenance and cache keys.
    fn model_id(&self) -> &str;

    fn complete(&self, spec: &PromptSpec) -> Result<Completion, BackendError>;
}

impl<B: ChatBackend + ?Sized> ChatBackend for &B {
    fn backend_id(&self) -> &str {
        (**self).backend_id()
    }

    fn model_id(&self) -> &str {
        (**self).model_id()
    }

    fn complete(&self, spec: &PromptSpec) -> Result<Completion, BackendError> {
        (**self).complete(spec)
    }
}

impl<B: ChatBackend + ?Sized> ChatBackend for Box<B> {
    fn backend_id(&self) -> &str {
        (**self).backend_id()
    }

    fn model_id(&self) -> &str {
        (**self).model_id()
    }

    fn complete(&self, spec: &PromptSpec) -> Result<Completion, BackendError> {
        (**self).complete(spec)
    }
}

//! HTTP embedding backend and its cache wrapper.
//!
//! Speaks the common embeddings wire protocol: request
//! `{model, input: [text]}`, response `{data: [{embedding: [...]}]}`.
//! Endpoint and credentials come from environment variables; retry rules
//! match the chat backend (5xx and connection errors retry, 4xx is fatal).

use std::time::Duration;

use serde_json::json;

use super::{EmbedError, EmbeddingBackend, EmbeddingVector};
use crate::backend::{sha256_hex, HttpTransport, ResponseCache, RetryPolicy};

/// Environment variables for the embeddings endpoint.
pub const ENV_EMBED_URL: &str = "COLDRANK_EMBED_URL";
pub const ENV_EMBED_MODEL: &str = "COLDRANK_EMBED_MODEL";
pub const ENV_API_KEY: &str = "COLDRANK_API_KEY";

/// Remote embeddings endpoint settings.
#[derive(Debug, Clone)]
pub struct EmbedEndpointConfig {
    pub url: String,
    pub api_key: Option<String>,
    pub model: String,
    pub timeout: Duration,
    pub retry: RetryPolicy,
}

impl EmbedEndpointConfig {
    pub fn new(url: impl Into<String>, model: impl Into<String>) -> Self {
        EmbedEndpointConfig {
            url: url.into(),
            api_key: None,
            model: model.into(),
            timeout: Duration::from_secs(60),
            retry: RetryPolicy::default(),
        }
    }

    pub fn from_env() -> Result<Self, EmbedError> {
        let url = std::env::var(ENV_EMBED_URL)
            .map_err(|_| EmbedError::Endpoint(format!("{ENV_EMBED_URL} is not set")))?;
        let model = std::env::var(ENV_EMBED_MODEL)
            .map_err(|_| EmbedError::Endpoint(format!("{ENV_EMBED_MODEL} is not set")))?;
        let mut cfg = EmbedEndpointConfig::new(url, model);
        cfg.api_key = std::env::var(ENV_API_KEY).ok();
        Ok(cfg)
    }
}

/// Embedding backend over a remote endpoint.
pub struct HttpEmbeddingBackend<T: HttpTransport> {
    cfg: EmbedEndpointConfig,
    transport: T,
    backend_id: String,
}

impl<T: HttpTransport> HttpEmbeddingBackend<T> {
    pub fn with_transport(cfg: EmbedEndpointConfig, transport: T) -> Self {
        HttpEmbeddingBackend {
            backend_id: format!("http-embed:{}", cfg.model),
            cfg,
            transport,
        }
    }
}

impl HttpEmbeddingBackend<crate::backend::ReqwestTransport> {
    pub fn new(cfg: EmbedEndpointConfig) -> Self {
        Self::with_transport(cfg, crate::backend::ReqwestTransport::new())
    }
}

impl<T: HttpTransport> EmbeddingBackend for HttpEmbeddingBackend<T> {
    fn backend_id(&self) -> &str {
        &self.backend_id
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        if text.trim().is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let body = json!({ "model": self.cfg.model, "input": [text] });

        let mut last_error = String::new();
        for attempt in 0..self.cfg.retry.max_attempts {
            if attempt > 0 {
                std::thread::sleep(
                    self.cfg
                        .retry
                        .base_delay
                        .mul_f64(self.cfg.retry.factor.powi(attempt as i32 - 1)),
                );
            }
            match self
                .transport
                .post_json(&self.cfg.url, self.cfg.api_key.as_deref(), &body, self.cfg.timeout)
            {
                Ok(response) if (200..300).contains(&response.status) => {
                    return parse_embedding(&response.body);
                }
                Ok(response) if response.status >= 500 => {
                    last_error = format!("HTTP {}", response.status);
                }
                Ok(response) => {
                    return Err(EmbedError::Endpoint(format!(
                        "HTTP {}: {}",
                        response.status,
                        response.body.chars().take(200).collect::<String>()
                    )));
                }
                Err(detail) => last_error = detail,
            }
        }
        Err(EmbedError::Endpoint(format!(
            "gave up after {} attempts; last error: {last_error}",
            self.cfg.retry.max_attempts
        )))
    }
}

fn parse_embedding(body: &str) -> Result<EmbeddingVector, EmbedError> {
    let value: serde_json::Value = serde_json::from_str(body)
        .map_err(|e| EmbedError::Endpoint(format!("unparseable response: {e}")))?;
    let components = value["data"][0]["embedding"]
        .as_array()
        .ok_or_else(|| EmbedError::Endpoint("response has no data[0].embedding".into()))?
        .iter()
        .map(|c| c.as_f64().ok_or_else(|| EmbedError::Endpoint("non-numeric component".into())))
        .collect::<Result<Vec<f64>, _>>()?;
    if components.is_empty() {
        return Err(EmbedError::Endpoint("empty embedding".into()));
    }
    EmbeddingVector::new(components)
}

/// Persistent cache around any embedding backend. Entries live beside chat
/// cache entries (digest-named files) and store the JSON component array.
pub struct CachedEmbeddingBackend<B> {
    inner: B,
    cache: ResponseCache,
}

impl<B: EmbeddingBackend> CachedEmbeddingBackend<B> {
    pub fn new(inner: B, dir: impl Into<std::path::PathBuf>) -> Self {
        CachedEmbeddingBackend {
            inner,
            cache: ResponseCache::new(dir),
        }
    }

    fn key(&self, text: &str) -> String {
        sha256_hex(format!("embed\x1f{}\x1f{text}", self.inner.backend_id()).as_bytes())
    }
}

impl<B: EmbeddingBackend> EmbeddingBackend for CachedEmbeddingBackend<B> {
    fn backend_id(&self) -> &str {
        self.inner.backend_id()
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let key = self.key(text);
        if let Some(stored) = self.cache.get(&key) {
            if let Ok(components) = serde_json::from_str::<Vec<f64>>(&stored) {
                return EmbeddingVector::new(components);
            }
            log::warn!("discarding corrupt embedding cache entry {key}");
        }
        let vector = self.inner.embed(text)?;
        let serialized = serde_json::to_string(vector.components()).expect("vector serializes");
        self.cache.put(&key, &serialized);
        Ok(vector)
    }
}

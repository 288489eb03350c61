//! HTTP chat backend speaking the standard chat-completions wire protocol.
//!
//! Request: `{model, messages: [system, user], temperature, max_tokens,
//! seed?}`; response: `choices[0].message.content` plus optional usage.
//! HTTP >= 500, timeouts and connection failures retry with exponential
//! backoff; any other 4xx is a fatal configuration error. In-flight
//! requests are bounded by a semaphore so a large parallel run cannot
//! stampede the endpoint.

use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use serde_json::json;

use super::{BackendError, ChatBackend, Completion, TokenUsage};
use crate::ranker::PromptSpec;

/// Environment variables the endpoint configuration reads.
pub const ENV_CHAT_URL: &str = "COLDRANK_CHAT_URL";
pub const ENV_API_KEY: &str = "COLDRANK_API_KEY";
pub const ENV_MODEL: &str = "COLDRANK_MODEL";
/// Override for the backoff base delay, in milliseconds.
pub const ENV_RETRY_BASE_MS: &str = "COLDRANK_RETRY_BASE_MS";

/// Exponential backoff schedule for transport-level retries.
#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    pub base_delay: Duration,
    pub factor: f64,
    pub max_attempts: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            base_delay: Duration::from_secs(1),
            factor: 2.0,
            max_attempts: 5,
        }
    }
}

impl RetryPolicy {
    fn delay_before(&self, attempt: u32) -> Duration {
        self.base_delay.mul_f64(self.factor.powi(attempt as i32))
    }
}

/// Remote endpoint settings.
#[derive(Debug, Clone)]
pub struct EndpointConfig {
    pub url: String,
    pub api_key: Option<String>,
    pub model: String,
    pub max_concurrency: usize,
    pub timeout: Duration,
    pub retry: RetryPolicy,
}

impl EndpointConfig {
    pub fn new(url: impl Into<String>, model: impl Into<String>) -> Self {
        EndpointConfig {
            url: url.into(),
            api_key: None,
            model: model.into(),
            max_concurrency: 4,
            timeout: Duration::from_secs(60),
            retry: RetryPolicy::default(),
        }
    }

    /// Read the endpoint from `COLDRANK_CHAT_URL`, `COLDRANK_API_KEY` and
    /// `COLDRANK_MODEL`, plus the optional `COLDRANK_RETRY_BASE_MS`.
    pub fn from_env() -> Result<Self, BackendError> {
        let url = std::env::var(ENV_CHAT_URL)
            .map_err(|_| BackendError::fatal(format!("{ENV_CHAT_URL} is not set")))?;
        let model = std::env::var(ENV_MODEL)
            .map_err(|_| BackendError::fatal(format!("{ENV_MODEL} is not set")))?;
        let mut cfg = EndpointConfig::new(url, model);
        cfg.api_key = std::env::var(ENV_API_KEY).ok();
        if let Some(base_ms) = std::env::var(ENV_RETRY_BASE_MS)
            .ok()
            .and_then(|v| v.parse::<u64>().ok())
        {
            cfg.retry.base_delay = Duration::from_millis(base_ms);
        }
        Ok(cfg)
    }
}

/// A raw HTTP exchange result.
#[derive(Debug, Clone)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

/// Pluggable transport so retry, backoff and concurrency logic can be
/// exercised against a fake in tests.
pub trait HttpTransport: Send + Sync {
    /// Post a JSON body. `Err` means a connection-level failure or timeout
    /// (always retryable); HTTP status errors come back as `Ok`.
    fn post_json(
        &self,
        url: &str,
        api_key: Option<&str>,
        body: &serde_json::Value,
        timeout: Duration,
    ) -> Result<HttpResponse, String>;
}

/// Blocking reqwest transport.
pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl ReqwestTransport {
    pub fn new() -> Self {
        ReqwestTransport {
            client: reqwest::blocking::Client::new(),
        }
    }
}

impl Default for ReqwestTransport {
    fn default() -> Self {
        Self::new()
    }
}

impl HttpTransport for ReqwestTransport {
    fn post_json(
        &self,
        url: &str,
        api_key: Option<&str>,
        body: &serde_json::Value,
        timeout: Duration,
    ) -> Result<HttpResponse, String> {
        let mut request = self.client.post(url).timeout(timeout).json(body);
        if let Some(key) = api_key {
            request = request.bearer_auth(key);
        }
        let response = request.send().map_err(|e| e.to_string())?;
        let status = response.status().as_u16();
        let body = response.text().map_err(|e| e.to_string())?;
        Ok(HttpResponse { status, body })
    }
}

/// Counting semaphore bounding in-flight requests.
pub(crate) struct Semaphore {
    permits: Mutex<usize>,
    available: Condvar,
}

impl Semaphore {
    pub(crate) fn new(permits: usize) -> Self {
        Semaphore {
            permits: Mutex::new(permits.max(1)),
            available: Condvar::new(),
        }
    }

    pub(crate) fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut permits = self.permits.lock().expect("semaphore lock");
        while *permits == 0 {
            permits = self.available.wait(permits).expect("semaphore wait");
        }
        *permits -= 1;
        SemaphoreGuard { semaphore: self }
    }
}

pub(crate) struct SemaphoreGuard<'a> {
    semaphore: &'a Semaphore,
}

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        let mut permits = self.semaphore.permits.lock().expect("semaphore lock");
        *permits += 1;
        self.semaphore.available.notify_one();
    }
}

/// Chat backend over a remote chat-completions endpoint.
pub struct HttpChatBackend<T: HttpTransport = ReqwestTransport> {
    cfg: EndpointConfig,
    transport: T,
    limiter: Semaphore,
    backend_id: String,
}

impl HttpChatBackend<ReqwestTransport> {
    pub fn new(cfg: EndpointConfig) -> Self {
        Self::with_transport(cfg, ReqwestTransport::new())
    }
}

impl<T: HttpTransport> HttpChatBackend<T> {
    pub fn with_transport(cfg: EndpointConfig, transport: T) -> Self {
        let limiter = Semaphore::new(cfg.max_concurrency);
        HttpChatBackend {
            backend_id: "http".to_string(),
            limiter,
            transport,
            cfg,
        }
    }

    fn request_body(&self, spec: &PromptSpec) -> serde_json::Value {
        let mut body = json!({
            "model": self.cfg.model,
            "messages": [
                {"role": "system", "content": spec.system_text},
                {"role": "user", "content": spec.user_text},
            ],
            "temperature": spec.decoding.temperature,
            "max_tokens": spec.decoding.max_tokens,
        });
        if let Some(seed) = spec.decoding.seed {
            body["seed"] = json!(seed);
        }
        body
    }

    fn parse_completion(&self, body: &str, latency_ms: u64) -> Result<Completion, BackendError> {
        let value: serde_json::Value = serde_json::from_str(body).map_err(|e| {
            BackendError::fatal(format!("endpoint returned unparseable JSON: {e}"))
        })?;
        let raw_text = value["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| {
                BackendError::fatal("endpoint response has no choices[0].message.content")
            })?
            .to_string();
        let usage = TokenUsage {
            prompt_tokens: value["usage"]["prompt_tokens"].as_u64().unwrap_or(0),
            completion_tokens: value["usage"]["completion_tokens"].as_u64().unwrap_or(0),
        };
        Ok(Completion {
            raw_text,
            usage,
            latency_ms,
        })
    }
}

impl<T: HttpTransport> ChatBackend for HttpChatBackend<T> {
    fn backend_id(&self) -> &str {
        &self.backend_id
    }

    fn model_id(&self) -> &str {
        &self.cfg.model
    }

    fn complete(&self, spec: &PromptSpec) -> Result<Completion, BackendError> {
        let _permit = self.limiter.acquire();
        let body = self.request_body(spec);
        let started = Instant::now();

        let mut last_transport_error = String::new();
        for attempt in 0..self.cfg.retry.max_attempts {
            if attempt > 0 {
                std::thread::sleep(self.cfg.retry.delay_before(attempt - 1));
            }
            match self.transport.post_json(
                &self.cfg.url,
                self.cfg.api_key.as_deref(),
                &body,
                self.cfg.timeout,
            ) {
                Ok(response) if (200..300).contains(&response.status) => {
                    let latency_ms = started.elapsed().as_millis() as u64;
                    return self.parse_completion(&response.body, latency_ms);
                }
                Ok(response) if response.status >= 500 => {
                    last_transport_error =
                        format!("HTTP {} from endpoint: {}", response.status, truncate(&response.body));
                    log::warn!("attempt {}: {last_transport_error}", attempt + 1);
                }
                Ok(response) => {
                    return Err(BackendError::Fatal {
                        status: Some(response.status),
                        detail: truncate(&response.body),
                    });
                }
                Err(detail) => {
                    last_transport_error = detail;
                    log::warn!("attempt {}: {last_transport_error}", attempt + 1);
                }
            }
        }
        Err(BackendError::transport(format!(
            "gave up after {} attempts; last error: {last_transport_error}",
            self.cfg.retry.max_attempts
        )))
    }
}

fn truncate(body: &str) -> String {
    body.chars().take(200).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{MovieId, Tier};
    use crate::ranker::DecodingParams;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    fn spec() -> PromptSpec {
        PromptSpec {
            system_text: "sys".into(),
            user_text: "rank m1 m2".into(),
            expected_ids: vec![MovieId::from("m1"), MovieId::from("m2")],
            tier: Tier::V1,
            decoding: DecodingParams {
                seed: Some(3),
                ..DecodingParams::default()
            },
        }
    }

    fn fast_cfg() -> EndpointConfig {
        let mut cfg = EndpointConfig::new("http://localhost/v1/chat/completions", "test-model");
        cfg.retry = RetryPolicy {
            base_delay: Duration::from_millis(1),
            factor: 2.0,
            max_attempts: 5,
        };
        cfg
    }

    fn ok_body(content: &str) -> String {
        serde_json::to_string(&json!({
            "choices": [{"message": {"role": "assistant", "content": content}}],
            "usage": {"prompt_tokens": 11, "completion_tokens": 7},
        }))
        .unwrap()
    }

    /// Scripted transport returning a fixed status/body sequence.
    struct FakeTransport {
        script: Mutex<Vec<Result<HttpResponse, String>>>,
        calls: Arc<AtomicUsize>,
        bodies: Mutex<Vec<serde_json::Value>>,
    }

    impl FakeTransport {
        fn new(script: Vec<Result<HttpResponse, String>>) -> Self {
            FakeTransport {
                script: Mutex::new(script),
                calls: Arc::new(AtomicUsize::new(0)),
                bodies: Mutex::new(Vec::new()),
            }
        }
    }

    impl HttpTransport for FakeTransport {
        fn post_json(
            &self,
            _url: &str,
            _api_key: Option<&str>,
            body: &serde_json::Value,
            _timeout: Duration,
        ) -> Result<HttpResponse, String> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.bodies.lock().unwrap().push(body.clone());
            let mut script = self.script.lock().unwrap();
            if script.is_empty() {
                return Err("script exhausted".into());
            }
            script.remove(0)
        }
    }

    #[test]
    fn canned_200_returns_the_assistant_text_verbatim() {
        let transport = FakeTransport::new(vec![Ok(HttpResponse {
            status: 200,
            body: ok_body("{\"ranking\":[]}"),
        })]);
        let backend = HttpChatBackend::with_transport(fast_cfg(), transport);
        let completion = backend.complete(&spec()).unwrap();
        assert_eq!(completion.raw_text, "{\"ranking\":[]}");
        assert_eq!(completion.usage.prompt_tokens, 11);
        assert_eq!(completion.usage.completion_tokens, 7);
    }

    #[test]
    fn two_503s_then_200_succeeds_after_two_backoffs() {
        let transport = FakeTransport::new(vec![
            Ok(HttpResponse { status: 503, body: "overloaded".into() }),
            Ok(HttpResponse { status: 503, body: "overloaded".into() }),
            Ok(HttpResponse { status: 200, body: ok_body("ok") }),
        ]);
        let calls = Arc::clone(&transport.calls);
        let backend = HttpChatBackend::with_transport(fast_cfg(), transport);
        let completion = backend.complete(&spec()).unwrap();
        assert_eq!(completion.raw_text, "ok");
        assert_eq!(calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn http_401_is_fatal_with_no_retry() {
        let transport = FakeTransport::new(vec![Ok(HttpResponse {
            status: 401,
            body: "bad key".into(),
        })]);
        let calls = Arc::clone(&transport.calls);
        let backend = HttpChatBackend::with_transport(fast_cfg(), transport);
        let err = backend.complete(&spec()).unwrap_err();
        match err {
            BackendError::Fatal { status, .. } => assert_eq!(status, Some(401)),
            other => panic!("expected fatal error, got {other:?}"),
        }
        assert_eq!(calls.load(Ordering::SeqCst), 1);
        assert!(!err.is_retryable());
    }

    #[test]
    fn connection_errors_exhaust_into_a_transport_error() {
        let transport = FakeTransport::new(vec![
            Err("connection refused".into()),
            Err("connection refused".into()),
            Err("connection refused".into()),
            Err("connection refused".into()),
            Err("connection refused".into()),
        ]);
        let calls = Arc::clone(&transport.calls);
        let backend = HttpChatBackend::with_transport(fast_cfg(), transport);
        let err = backend.complete(&spec()).unwrap_err();
        assert!(err.is_retryable());
        assert_eq!(calls.load(Ordering::SeqCst), 5);
    }

    #[test]
    fn request_body_follows_the_wire_protocol() {
        let transport = FakeTransport::new(vec![Ok(HttpResponse {
            status: 200,
            body: ok_body("ok"),
        })]);
        let backend = HttpChatBackend::with_transport(fast_cfg(), transport);
        backend.complete(&spec()).unwrap();

        let bodies = backend.transport.bodies.lock().unwrap();
        let body = &bodies[0];
        assert_eq!(body["model"], "test-model");
        assert_eq!(body["messages"][0]["role"], "system");
        assert_eq!(body["messages"][1]["role"], "user");
        assert_eq!(body["messages"][1]["content"], "rank m1 m2");
        assert_eq!(body["seed"], 3);
        assert!(body["temperature"].is_number());
        assert!(body["max_tokens"].is_number());
    }

    /// In-flight calls never exceed the configured concurrency limit.
    #[test]
    fn semaphore_bounds_in_flight_requests() {
        struct SlowTransport {
            in_flight: Arc<AtomicUsize>,
            peak: Arc<AtomicUsize>,
        }

        impl HttpTransport for SlowTransport {
            fn post_json(
                &self,
                _url: &str,
                _key: Option<&str>,
                _body: &serde_json::Value,
                _timeout: Duration,
            ) -> Result<HttpResponse, String> {
                let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
                self.peak.fetch_max(now, Ordering::SeqCst);
                std::thread::sleep(Duration::from_millis(15));
                self.in_flight.fetch_sub(1, Ordering::SeqCst);
                Ok(HttpResponse {
                    status: 200,
                    body: ok_body("ok"),
                })
            }
        }

        let in_flight = Arc::new(AtomicUsize::new(0));
        let peak = Arc::new(AtomicUsize::new(0));
        let mut cfg = fast_cfg();
        cfg.max_concurrency = 3;
        let backend = Arc::new(HttpChatBackend::with_transport(
            cfg,
            SlowTransport {
                in_flight: Arc::clone(&in_flight),
                peak: Arc::clone(&peak),
            },
        ));

        let handles: Vec<_> = (0..12)
            .map(|_| {
                let backend = Arc::clone(&backend);
                std::thread::spawn(move || backend.complete(&spec()).unwrap())
            })
            .collect();
        for handle in handles {
            handle.join().unwrap();
        }
        assert!(peak.load(Ordering::SeqCst) <= 3, "peak {peak:?} exceeded limit");
    }
}

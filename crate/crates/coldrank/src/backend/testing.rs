//! Deterministic backends for tests and benches: a scripted backend that
//! replays a fixed response sequence, a comparator that ranks ids
//! lexicographically, and a call-counting wrapper.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use super::{oracle::render_ranking, BackendError, ChatBackend, Completion};
use crate::ranker::PromptSpec;

/// Replays a fixed sequence of raw responses (or errors), one per call.
pub struct ScriptedBackend {
    responses: Mutex<VecDeque<Result<String, BackendError>>>,
}

impl ScriptedBackend {
    pub fn new(responses: Vec<Result<String, BackendError>>) -> Self {
        ScriptedBackend {
            responses: Mutex::new(responses.into()),
        }
    }

    pub fn from_texts(texts: &[&str]) -> Self {
        Self::new(texts.iter().map(|t| Ok(t.to_string())).collect())
    }
}

impl ChatBackend for ScriptedBackend {
    fn backend_id(&self) -> &str {
        "scripted"
    }

    fn model_id(&self) -> &str {
        "scripted"
    }

    fn complete(&self, _spec: &PromptSpec) -> Result<Completion, BackendError> {
        let next = self.responses.lock().expect("script lock").pop_front();
        match next {
            Some(Ok(text)) => Ok(Completion::offline(text)),
            Some(Err(e)) => Err(e),
            None => Err(BackendError::fatal("scripted backend ran out of responses")),
        }
    }
}

/// Ranks the requested ids in ascending lexicographic order: a fully
/// deterministic comparator with a known induced total order.
#[derive(Debug, Default)]
pub struct LexicographicBackend;

impl LexicographicBackend {
    pub fn new() -> Self {
        LexicographicBackend
    }
}

impl ChatBackend for LexicographicBackend {
    fn backend_id(&self) -> &str {
        "lexicographic"
    }

    fn model_id(&self) -> &str {
        "lexicographic"
    }

    fn complete(&self, spec: &PromptSpec) -> Result<Completion, BackendError> {
        let mut order = spec.expected_ids.clone();
        order.sort();
        Ok(Completion::offline(render_ranking(&order, "lexicographic order")))
    }
}

/// Counts calls into the wrapped backend.
pub struct CountingBackend<B> {
    inner: B,
    calls: Arc<AtomicUsize>,
}

impl<B: ChatBackend> CountingBackend<B> {
    pub fn new(inner: B) -> Self {
        CountingBackend {
            inner,
            calls: Arc::new(AtomicUsize::new(0)),
        }
    }

    pub fn calls(&self) -> Arc<AtomicUsize> {
        Arc::clone(&self.calls)
    }
}

impl<B: ChatBackend> ChatBackend for CountingBackend<B> {
    fn backend_id(&self) -> &str {
        self.inner.backend_id()
    }

    fn model_id(&self) -> &str {
        self.inner.model_id()
    }

    fn complete(&self, spec: &PromptSpec) -> Result<Completion, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.complete(spec)
    }
}

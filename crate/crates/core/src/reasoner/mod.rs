//! Boundary to the external reasoning service: request types, prompt
//! construction, reply grammars, backends and a retrying client.

pub mod grammar;
pub mod http;
pub mod mock;
pub mod prompts;

use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::domain::QAPair;
use crate::error::{Error, Result};

pub use grammar::{parse_clip_list, parse_clip_num, parse_yes_no, render_clip_num};
pub use http::HttpBackend;
pub use mock::{MockBackend, MockScenario};

/// Environment variable naming the reasoner endpoint.
pub const ENDPOINT_ENV: &str = "VIDTHINKER_REASONER_URL";
pub const DEFAULT_MAX_PARALLELISM: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    KeyPhrases,
    ClipCaption,
    ClipRetrieval,
    FrameVerdict,
    ClassifyMotion,
    ClassifyNonexistence,
    ClassifyHolistic,
    ClassifySemantic,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::KeyPhrases => "key_phrases",
            Role::ClipCaption => "clip_caption",
            Role::ClipRetrieval => "clip_retrieval",
            Role::FrameVerdict => "frame_verdict",
            Role::ClassifyMotion => "classify_motion",
            Role::ClassifyNonexistence => "classify_nonexistence",
            Role::ClassifyHolistic => "classify_holistic",
            Role::ClassifySemantic => "classify_semantic",
        }
    }

    /// Roles whose requests carry imagery.
    pub fn takes_attachments(self) -> bool {
        matches!(self, Role::ClipCaption | Role::FrameVerdict)
    }
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One call to the reasoning service. Attachments are opaque frame or clip
/// references the backend resolves to imagery.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasonRequest {
    pub role: Role,
    pub prompt: String,
    pub attachments: Vec<String>,
}

impl ReasonRequest {
    pub fn new(role: Role, prompt: impl Into<String>, attachments: Vec<String>) -> Result<Self> {
        let req = Self { role, prompt: prompt.into(), attachments };
        req.validate()?;
        Ok(req)
    }

    pub fn validate(&self) -> Result<()> {
        if self.prompt.trim().is_empty() {
            return Err(Error::Validation(format!("{} request has an empty prompt", self.role)));
        }
        if self.role.takes_attachments() == self.attachments.is_empty() {
            return Err(Error::Validation(format!(
                "{} request must {}carry attachments",
                self.role,
                if self.role.takes_attachments() { "" } else { "not " }
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasonResponse {
    pub text: String,
}

/// Parsed clip-retrieval reply. `clips` is `None` when nothing is relevant;
/// an empty list is normalized to `None`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub explanation: String,
    pub clips: Option<Vec<usize>>,
}

impl RetrievalResult {
    pub fn new(explanation: impl Into<String>, clips: Option<Vec<usize>>) -> Self {
        let clips = clips.filter(|c| !c.is_empty());
        Self { explanation: explanation.into(), clips }
    }

    pub fn clip_indices(&self) -> &[usize] {
        self.clips.as_deref().unwrap_or(&[])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameVerdict {
    pub frame_index: usize,
    pub relevant: bool,
}

/// A reasoning service. Implementations must accept concurrent calls.
pub trait ReasonerBackend: Send + Sync {
    fn complete(&self, request: &ReasonRequest) -> Result<String>;
}

/// One request/response pair, kept for provenance and tracing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exchange {
    pub role: Role,
    pub prompt: String,
    pub attachments: Vec<String>,
    pub response: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_retries: 3, base_delay: Duration::from_millis(250), max_delay: Duration::from_secs(8) }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        Self { max_retries: 0, ..Self::default() }
    }

    pub fn immediate(max_retries: u32) -> Self {
        Self { max_retries, base_delay: Duration::ZERO, max_delay: Duration::ZERO }
    }

    fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

/// Counting semaphore bounding in-flight backend calls.
#[derive(Debug)]
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    fn new(permits: usize) -> Self {
        Self { free: Mutex::new(permits.max(1)), cv: Condvar::new() }
    }

    fn acquire(&self) -> GatePermit<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        GatePermit(self)
    }
}

struct GatePermit<'a>(&'a Gate);

impl Drop for GatePermit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

/// Classifier probes answered with yes/no.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Probe {
    Motion,
    Nonexistence,
    Holistic,
    Semantic,
}

impl Probe {
    pub fn role(self) -> Role {
        match self {
            Probe::Motion => Role::ClassifyMotion,
            Probe::Nonexistence => Role::ClassifyNonexistence,
            Probe::Holistic => Role::ClassifyHolistic,
            Probe::Semantic => Role::ClassifySemantic,
        }
    }

    pub fn prompt(self, qa: &QAPair) -> String {
        match self {
            Probe::Motion => prompts::motion_prompt(qa),
            Probe::Nonexistence => prompts::nonexistence_prompt(qa),
            Probe::Holistic => prompts::holistic_prompt(qa),
            Probe::Semantic => prompts::semantic_prompt(qa),
        }
    }
}

/// Shared handle to a backend with retries and a parallelism cap.
#[derive(Clone)]
pub struct ReasonerClient {
    backend: Arc<dyn ReasonerBackend>,
    retry: RetryPolicy,
    gate: Arc<Gate>,
}

impl ReasonerClient {
    pub fn new(backend: Arc<dyn ReasonerBackend>) -> Self {
        Self { backend, retry: RetryPolicy::default(), gate: Arc::new(Gate::new(DEFAULT_MAX_PARALLELISM)) }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_max_parallelism(mut self, n: usize) -> Self {
        self.gate = Arc::new(Gate::new(n));
        self
    }

    /// Sends a request, retrying transport failures with exponential backoff.
    /// The exchange is appended to `log` on success.
    pub fn call(&self, request: ReasonRequest, log: &mut Vec<Exchange>) -> Result<String> {
        request.validate()?;
        let mut attempt = 0;
        let text = loop {
            let result = {
                let _permit = self.gate.acquire();
                self.backend.complete(&request)
            };
            match result {
                Ok(text) => break text,
                Err(e) if e.is_transient() && attempt < self.retry.max_retries => {
                    log::warn!("{} call failed (attempt {}): {e}", request.role, attempt + 1);
                    std::thread::sleep(self.retry.delay(attempt));
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        };
        log.push(Exchange {
            role: request.role,
            prompt: request.prompt,
            attachments: request.attachments,
            response: text.clone(),
        });
        Ok(text)
    }

    /// Distills the QA pair into a short cue sentence. An empty reply yields
    /// an empty cue.
    pub fn extract_key_phrases(&self, qa: &QAPair, log: &mut Vec<Exchange>) -> Result<String> {
        let req = ReasonRequest::new(Role::KeyPhrases, prompts::key_phrase_prompt(qa), vec![])?;
        Ok(self.call(req, log)?.trim().to_string())
    }

    pub fn caption_clip(&self, cue: &str, clip_ref: &str, log: &mut Vec<Exchange>) -> Result<String> {
        let req = ReasonRequest::new(Role::ClipCaption, prompts::caption_prompt(cue, clip_ref), vec![clip_ref.into()])?;
        Ok(self.call(req, log)?.trim().to_string())
    }

    pub fn retrieve_clips(&self, captions: &[String], qa: &QAPair, log: &mut Vec<Exchange>) -> Result<RetrievalResult> {
        if captions.is_empty() {
            return Err(Error::Validation("clip retrieval needs at least one caption".into()));
        }
        let req = ReasonRequest::new(Role::ClipRetrieval, prompts::retrieval_prompt(captions, qa), vec![])?;
        let text = self.call(req, log)?;
        parse_clip_num(&text, Some(captions.len()))
    }

    pub fn verdict_frame(
        &self,
        frame_index: usize,
        frame_ref: &str,
        qa: &QAPair,
        log: &mut Vec<Exchange>,
    ) -> Result<FrameVerdict> {
        let req =
            ReasonRequest::new(Role::FrameVerdict, prompts::verdict_prompt(frame_ref, qa), vec![frame_ref.into()])?;
        let text = self.call(req, log)?;
        Ok(FrameVerdict { frame_index, relevant: parse_yes_no(&text)? })
    }

    pub fn probe(&self, probe: Probe, qa: &QAPair, log: &mut Vec<Exchange>) -> Result<bool> {
        let req = ReasonRequest::new(probe.role(), probe.prompt(qa), vec![])?;
        parse_yes_no(&self.call(req, log)?)
    }
}

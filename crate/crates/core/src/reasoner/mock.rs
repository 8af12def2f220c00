//! Deterministic scenario-driven backend for tests and golden runs.
//!
//! A scenario file is JSON:
//!
//! ```json
//! {
//!   "responses": {
//!     "clip_retrieval:3f2a9c0d11b4e6a7": "{\"explanation\": \"...\", \"clip_num\": \"One clip: [Clip-2]\"}",
//!     "frame_verdict@drums/frame/12": "Yes"
//!   },
//!   "defaults": { "frame_verdict": "No", "clip_caption": "A stage." }
//! }
//! ```
//!
//! Lookup order: `role:<first 16 hex of sha256(prompt)>`, then
//! `role@<attachments joined by ','>`, then the per-role default.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ReasonRequest, ReasonerBackend, Role};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockScenario {
    #[serde(default)]
    pub responses: BTreeMap<String, String>,
    #[serde(default)]
    pub defaults: BTreeMap<Role, String>,
}

/// Scenario key pinning an exact prompt.
pub fn prompt_key(role: Role, prompt: &str) -> String {
    let digest = Sha256::digest(prompt.as_bytes());
    format!("{}:{}", role.as_str(), &hex::encode(digest)[..16])
}

/// Scenario key matching a request by its attachments.
pub fn attachment_key(role: Role, attachments: &[String]) -> String {
    format!("{}@{}", role.as_str(), attachments.join(","))
}

impl MockScenario {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn with_default(mut self, role: Role, text: impl Into<String>) -> Self {
        self.defaults.insert(role, text.into());
        self
    }

    pub fn with_prompt(mut self, role: Role, prompt: &str, text: impl Into<String>) -> Self {
        self.responses.insert(prompt_key(role, prompt), text.into());
        self
    }

    pub fn with_attachment(mut self, role: Role, attachment: &str, text: impl Into<String>) -> Self {
        self.responses.insert(attachment_key(role, &[attachment.to_string()]), text.into());
        self
    }

    pub fn respond(&self, request: &ReasonRequest) -> Option<&str> {
        let by_prompt = prompt_key(request.role, &request.prompt);
        if let Some(t) = self.responses.get(&by_prompt) {
            return Some(t);
        }
        if !request.attachments.is_empty() {
            if let Some(t) = self.responses.get(&attachment_key(request.role, &request.attachments)) {
                return Some(t);
            }
        }
        self.defaults.get(&request.role).map(String::as_str)
    }
}

#[derive(Debug, Clone)]
pub struct MockBackend {
    scenario: MockScenario,
}

impl MockBackend {
    pub fn new(scenario: MockScenario) -> Self {
        Self { scenario }
    }

    /// Answers every role with the same text.
    pub fn fixed(text: impl Into<String>) -> Self {
        let text = text.into();
        let mut scenario = MockScenario::new();
        for role in [
            Role::KeyPhrases,
            Role::ClipCaption,
            Role::ClipRetrieval,
            Role::FrameVerdict,
            Role::ClassifyMotion,
            Role::ClassifyNonexistence,
            Role::ClassifyHolistic,
            Role::ClassifySemantic,
        ] {
            scenario.defaults.insert(role, text.clone());
        }
        Self { scenario }
    }
}

impl ReasonerBackend for MockBackend {
    fn complete(&self, request: &ReasonRequest) -> Result<String> {
        self.scenario.respond(request).map(str::to_string).ok_or_else(|| {
            Error::Protocol(format!(
                "mock scenario has no response for {} (attachments {:?})",
                prompt_key(request.role, &request.prompt),
                request.attachments
            ))
        })
    }
}

//! JSON-over-HTTP backend.
//!
//! `POST <url>` with `{"role", "prompt", "attachments"}`; the service replies
//! `{"text": "..."}`. Retries live in [`super::ReasonerClient`].

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{ReasonRequest, ReasonResponse, ReasonerBackend, ENDPOINT_ENV};
use crate::error::{Error, Result};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

/// Thin JSON POST helper shared by the reasoner and remote scorer.
#[derive(Debug, Clone)]
pub struct JsonEndpoint {
    url: String,
    agent: ureq::Agent,
}

impl JsonEndpoint {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent =
            ureq::Agent::config_builder().timeout_global(Some(timeout)).http_status_as_error(true).build().into();
        Self { url: url.into(), agent }
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    pub fn post<Req: Serialize, Resp: DeserializeOwned>(&self, body: &Req) -> Result<Resp> {
        let mut response = self.agent.post(&self.url).send_json(body).map_err(|e| map_error(&self.url, e))?;
        response.body_mut().read_json::<Resp>().map_err(|e| match e {
            ureq::Error::Json(j) => Error::Protocol(format!("{}: malformed reply: {j}", self.url)),
            other => map_error(&self.url, other),
        })
    }
}

fn map_error(url: &str, e: ureq::Error) -> Error {
    match e {
        ureq::Error::StatusCode(code) if code == 429 || code >= 500 => Error::Transport(format!("{url}: HTTP {code}")),
        ureq::Error::StatusCode(code) => Error::Protocol(format!("{url}: HTTP {code}")),
        ureq::Error::Json(j) => Error::Protocol(format!("{url}: {j}")),
        other => Error::Transport(format!("{url}: {other}")),
    }
}

#[derive(Debug, Clone)]
pub struct HttpBackend {
    endpoint: JsonEndpoint,
}

impl HttpBackend {
    pub fn new(url: impl Into<String>) -> Self {
        Self::with_timeout(url, DEFAULT_TIMEOUT)
    }

    pub fn with_timeout(url: impl Into<String>, timeout: Duration) -> Self {
        Self { endpoint: JsonEndpoint::new(url, timeout) }
    }

    /// Backend pointed at `$VIDTHINKER_REASONER_URL`.
    pub fn from_env() -> Result<Self> {
        let url = std::env::var(ENDPOINT_ENV).map_err(|_| Error::Validation(format!("{ENDPOINT_ENV} is not set")))?;
        Ok(Self::new(url))
    }
}

impl ReasonerBackend for HttpBackend {
    fn complete(&self, request: &ReasonRequest) -> Result<String> {
        let reply: ReasonResponse = self.endpoint.post(request)?;
        Ok(reply.text)
    }
}

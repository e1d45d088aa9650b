//! Foundation-model access: prompt templates, answer parsing and providers
//! (live HTTP, record, replay, mock).

mod cassette;
mod parse;
mod prompt;
mod provider;

pub use cassette::{Cassette, CassetteEntry};
pub use parse::{
    parse_function_output, parse_row_value, parse_sampled_candidate, parse_unary_proposals, Confidence,
    GenerationError, GenerationOutcome, ProposalSet, UnaryProposal,
};
pub use prompt::{render_function_prompt, render_prompt, render_row_prompt, PromptContext, PromptError};
pub use provider::{
    ENV_API_BASE, ENV_API_KEY, ENV_MODEL,
    FnProvider, HttpProvider, MockProvider, Models, ProviderConfig, ProviderMode, Recorder, ReplayProvider,
};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Which side of the loop is asking: the operator selector or the function generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Selector,
    Generator,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Selector => "selector",
            Role::Generator => "generator",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest {
    pub role: Role,
    pub prompt: String,
    pub temperature: f64,
}

impl CompletionRequest {
    pub fn new(role: Role, prompt: impl Into<String>, temperature: f64) -> Self {
        Self {
            role,
            prompt: prompt.into(),
            temperature,
        }
    }
}

/// Temperatures by prompting strategy.
pub const PROPOSAL_TEMPERATURE: f64 = 0.0;
pub const SAMPLING_TEMPERATURE: f64 = 0.7;
pub const GENERATOR_TEMPERATURE: f64 = 0.0;

#[derive(Debug, thiserror::Error)]
pub enum ProviderError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("request timed out after {0}s")]
    Timeout(u64),
    #[error("API returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed API response: {0}")]
    BadResponse(String),
    #[error("no recorded response for {role} prompt {fingerprint}")]
    FingerprintMiss { role: &'static str, fingerprint: String },
    #[error("provider configuration: {0}")]
    Config(String),
    #[error("cassette {path}: {message}")]
    Cassette { path: String, message: String },
}

impl ProviderError {
    /// Failures worth one retry.
    pub fn is_transient(&self) -> bool {
        match self {
            ProviderError::Transport(_) | ProviderError::Timeout(_) => true,
            ProviderError::Status { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

/// Anything that turns a prompt into text. Implementations must tolerate
/// concurrent calls.
pub trait Provider: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError>;

    /// Flushes state at the end of a run (the recorder writes its cassette).
    fn finish(&self) -> Result<(), ProviderError> {
        Ok(())
    }
}

impl<P: Provider + ?Sized> Provider for Box<P> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        (**self).complete(request)
    }

    fn finish(&self) -> Result<(), ProviderError> {
        (**self).finish()
    }
}

impl<P: Provider + ?Sized> Provider for std::sync::Arc<P> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        (**self).complete(request)
    }

    fn finish(&self) -> Result<(), ProviderError> {
        (**self).finish()
    }
}

/// Hex SHA-256 over role, model id and prompt.
pub fn fingerprint(role: Role, model: &str, prompt: &str) -> String {
    let mut h = Sha256::new();
    h.update(role.as_str().as_bytes());
    h.update([0]);
    h.update(model.as_bytes());
    h.update([0]);
    h.update(prompt.as_bytes());
    hex::encode(h.finalize())
}

//! Uniform clients for the three external services the pipeline talks to:
//! text completion, NLI entailment scoring, and reward scoring.
//!
//! Every service is a trait, so the pipeline never knows whether an endpoint
//! is a live model server or a deterministic mock — swapping one for the
//! other changes no other module's behavior. Concurrency lives in one place,
//! [`map_batched`]: a bounded fan-out that returns results in input order.

mod batch;
mod http;
pub mod mock;
mod server;

pub use batch::map_batched;
pub use http::{HttpCompletionClient, HttpNliClient, HttpRewardClient, RetryPolicy};
pub use server::MockServer;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A greedy-decode completion request.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub max_new_tokens: u32,
    pub temperature: f64,
    pub stop_sequences: Vec<String>,
}

/// Premise/hypothesis pair for entailment scoring.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NliRequest {
    pub premise: String,
    pub hypothesis: String,
}

/// Instruction/response pair for reward scoring.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RewardRequest {
    pub instruction: String,
    pub response: String,
}

/// A score in `[0, 1]` with provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreResult {
    pub value: f64,
    pub model_id: String,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, Error)]
pub enum GatewayError {
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("endpoint returned {status}: {body}")]
    EndpointError { status: u16, body: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("no canned response for this request")]
    MockMiss,
    #[error("bad endpoint spec {0:?}")]
    BadEndpoint(String),
}

/// A text-completion service. Returns only the continuation, never the
/// prompt, with stop sequences honored.
pub trait CompletionService: Send + Sync {
    fn complete(&self, req: &CompletionRequest) -> Result<String, GatewayError>;
}

/// An NLI scorer: probability that the premise entails the hypothesis.
pub trait NliService: Send + Sync {
    fn score_nli(&self, req: &NliRequest) -> Result<ScoreResult, GatewayError>;
}

/// A reward scorer: preference score for an instruction/response pair.
pub trait RewardService: Send + Sync {
    fn score_reward(&self, req: &RewardRequest) -> Result<ScoreResult, GatewayError>;
}

impl NliRequest {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.premise.trim().is_empty() {
            return Err(GatewayError::InvalidRequest("empty NLI premise".into()));
        }
        if self.hypothesis.trim().is_empty() {
            return Err(GatewayError::InvalidRequest("empty NLI hypothesis".into()));
        }
        Ok(())
    }
}

impl RewardRequest {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.instruction.trim().is_empty() {
            return Err(GatewayError::InvalidRequest("empty reward instruction".into()));
        }
        if self.response.trim().is_empty() {
            return Err(GatewayError::InvalidRequest("empty reward response".into()));
        }
        Ok(())
    }
}

impl CompletionRequest {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.prompt.is_empty() {
            return Err(GatewayError::InvalidRequest("empty prompt".into()));
        }
        if self.max_new_tokens == 0 {
            return Err(GatewayError::InvalidRequest("max_new_tokens must be >= 1".into()));
        }
        if self.temperature < 0.0 {
            return Err(GatewayError::InvalidRequest("negative temperature".into()));
        }
        Ok(())
    }
}

/// Cut `text` at the first occurrence of any stop sequence.
pub(crate) fn apply_stop_sequences(text: &str, stops: &[String]) -> String {
    let cut = stops
        .iter()
        .filter(|s| !s.is_empty())
        .filter_map(|s| text.find(s.as_str()))
        .min()
        .unwrap_or(text.len());
    text[..cut].to_owned()
}

/// How a raw service score is mapped into `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreTransform {
    /// Service already emits a calibrated probability; clamp only.
    #[default]
    Identity,
    /// Service emits a raw logit; squash with the logistic function.
    Logistic,
}

impl ScoreTransform {
    pub fn apply(&self, raw: f64) -> f64 {
        match self {
            ScoreTransform::Identity => raw.clamp(0.0, 1.0),
            ScoreTransform::Logistic => 1.0 / (1.0 + (-raw).exp()),
        }
    }
}

//! Knowledge models: anything that fills in tails for (head, relation) pairs.

mod api;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::knowledge::{KnowledgeGraph, KnowledgeTuple};

pub use api::{complete_via_api, ApiConfig, ApiModel, CompletionRequest, API_KEY_ENV, API_URL_ENV};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("credential error: {0}")]
    Credential(String),
    /// Every request failed in transport; `partial` holds the input pairs
    /// with whatever tails could be produced (none, in practice).
    #[error("transport error: {message}")]
    Transport { message: String, partial: KnowledgeGraph },
    #[error("API returned status {status}: {body}")]
    Api { status: u16, body: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("unexpected response: {0}")]
    Response(String),
}

/// Decoding parameters passed to a backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodeConfig {
    pub max_tokens: u32,
    pub temperature: f64,
    pub stop: Vec<String>,
    /// Completions requested per (head, relation).
    pub n: u32,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            max_tokens: 24,
            temperature: 0.0,
            stop: vec!["\n".to_string()],
            n: 1,
        }
    }
}

/// A tuple the backend could not complete.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub index: usize,
    pub head: String,
    pub relation: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    pub graph: KnowledgeGraph,
    pub diagnostics: Vec<Diagnostic>,
}

pub trait KnowledgeModel: Send + Sync {
    fn name(&self) -> &str;

    /// Returns `partial` with tails populated, in the same order. Existing
    /// tails are replaced.
    fn generate(&self, partial: &KnowledgeGraph, decode: &DecodeConfig) -> Result<Generation, ModelError>;
}

/// Deterministic backend whose tail echoes the relation and head.
#[derive(Debug, Clone, Copy, Default)]
pub struct StubModel;

impl StubModel {
    pub fn tail_for(head: &str, relation: &str) -> String {
        format!("to <stub:{relation}:{head}>")
    }
}

impl KnowledgeModel for StubModel {
    fn name(&self) -> &str {
        "stub"
    }

    fn generate(&self, partial: &KnowledgeGraph, _decode: &DecodeConfig) -> Result<Generation, ModelError> {
        let graph = partial
            .iter()
            .map(|t| KnowledgeTuple {
                tails: vec![Self::tail_for(t.head.text(), &t.relation)],
                ..t.clone()
            })
            .collect();
        Ok(Generation {
            graph,
            diagnostics: Vec::new(),
        })
    }
}

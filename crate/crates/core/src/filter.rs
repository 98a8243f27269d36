//! Relevance filtering of generated tuples against their source context.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::http::{self, HttpFailure, RetryPolicy};
use crate::knowledge::{KnowledgeGraph, KnowledgeTuple};
use crate::matching::{mean_pool, TokenEmbedder};
use crate::pool;
use crate::relations::{verbalize, RelationRegistry};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("threshold {0} is outside [0, 1]")]
    Threshold(f64),
    #[error("context is empty")]
    EmptyContext,
    #[error("tuple has no tail to judge")]
    NoTail,
    #[error("scorer transport error: {0}")]
    Transport(String),
    #[error("scorer returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("unexpected scorer response: {0}")]
    Response(String),
}

/// A score in [0, 1], optionally flagged as uninformative.
#[derive(Debug, Clone, PartialEq)]
pub struct Relevance {
    pub score: f64,
    pub flag: Option<String>,
}

pub trait RelevanceScorer: Send + Sync {
    fn score(&self, context: &str, tuple: &KnowledgeTuple) -> Result<Relevance, FilterError>;

    /// Concurrent `score` calls `filter_graph` may issue.
    fn max_in_flight(&self) -> usize {
        1
    }
}

/// Cosine similarity of mean-pooled embeddings of the context and of the
/// verbalized fact (first tail), mapped to (cos + 1) / 2.
pub struct EmbeddingCosineScorer {
    embedder: Arc<dyn TokenEmbedder>,
    registry: Arc<RelationRegistry>,
}

impl EmbeddingCosineScorer {
    pub fn new(embedder: Arc<dyn TokenEmbedder>, registry: Arc<RelationRegistry>) -> Self {
        Self { embedder, registry }
    }

    /// Text the tuple is judged by.
    pub fn fact_text(&self, tuple: &KnowledgeTuple) -> Result<String, FilterError> {
        let tail = tuple.tails.first().ok_or(FilterError::NoTail)?;
        Ok(verbalize(&self.registry, &tuple.relation, tuple.head.text(), Some(tail), None))
    }

    pub fn score_texts(&self, a: &str, b: &str) -> Relevance {
        let (va, ka) = mean_pool(self.embedder.as_ref(), a);
        let (vb, kb) = mean_pool(self.embedder.as_ref(), b);
        if ka == 0 || kb == 0 {
            return Relevance {
                score: 0.5,
                flag: Some("no in-vocabulary tokens".into()),
            };
        }
        let cos = if va == vb {
            1.0
        } else {
            let dot: f64 = va.iter().zip(&vb).map(|(x, y)| x * y).sum();
            let na: f64 = va.iter().map(|x| x * x).sum();
            let nb: f64 = vb.iter().map(|x| x * x).sum();
            if na == 0.0 || nb == 0.0 {
                0.0
            } else {
                dot / (na * nb).sqrt()
            }
        };
        Relevance {
            score: ((cos + 1.0) / 2.0).clamp(0.0, 1.0),
            flag: None,
        }
    }
}

impl RelevanceScorer for EmbeddingCosineScorer {
    fn score(&self, context: &str, tuple: &KnowledgeTuple) -> Result<Relevance, FilterError> {
        Ok(self.score_texts(context, &self.fact_text(tuple)?))
    }
}

#[derive(Deserialize)]
struct ExternalResponse {
    relevance: f64,
}

/// Delegates to a classifier endpoint: POST {context, head, relation, tail}
/// and read back {relevance}.
pub struct ExternalScorer {
    url: String,
    retry: RetryPolicy,
    max_in_flight: usize,
    agent: ureq::Agent,
}

impl ExternalScorer {
    pub fn new(url: impl Into<String>, retry: RetryPolicy, max_in_flight: usize) -> Self {
        let agent = http::agent(&retry);
        Self {
            url: url.into(),
            retry,
            max_in_flight,
            agent,
        }
    }
}

impl RelevanceScorer for ExternalScorer {
    fn score(&self, context: &str, tuple: &KnowledgeTuple) -> Result<Relevance, FilterError> {
        let tail = tuple.tails.first().ok_or(FilterError::NoTail)?;
        let body = serde_json::json!({
            "context": context,
            "head": tuple.head.text(),
            "relation": tuple.relation,
            "tail": tail,
        });
        let text = http::post_json(&self.agent, &self.url, None, &body, &self.retry).map_err(|f| match f {
            HttpFailure::Transport(m) => FilterError::Transport(m),
            HttpFailure::Status { status, body } => FilterError::Status { status, body },
        })?;
        let resp: ExternalResponse =
            serde_json::from_str(&text).map_err(|e| FilterError::Response(format!("{e}: {}", http::excerpt(&text))))?;
        if !(0.0..=1.0).contains(&resp.relevance) {
            return Err(FilterError::Response(format!("relevance {} outside [0, 1]", resp.relevance)));
        }
        Ok(Relevance {
            score: resp.relevance,
            flag: None,
        })
    }

    fn max_in_flight(&self) -> usize {
        self.max_in_flight
    }
}

/// Scores one tuple after checking the context and tail preconditions.
pub fn relevance_score(context: &str, tuple: &KnowledgeTuple, scorer: &dyn RelevanceScorer) -> Result<Relevance, FilterError> {
    if context.trim().is_empty() {
        return Err(FilterError::EmptyContext);
    }
    if tuple.tails.is_empty() {
        return Err(FilterError::NoTail);
    }
    scorer.score(context, tuple)
}

/// What to do with a tuple the scorer failed on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailurePolicy {
    /// Keep it.
    #[default]
    Open,
    /// Drop it.
    Closed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceJudgment {
    pub tuple: KnowledgeTuple,
    /// `None` when the scorer failed.
    pub score: Option<f64>,
    pub keep: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutput {
    pub kept: KnowledgeGraph,
    pub judgments: Vec<RelevanceJudgment>,
}

/// Keeps tuples scoring at least `threshold`, in their original order.
/// There is one judgment per input tuple.
pub fn filter_graph(
    graph: &KnowledgeGraph,
    context: &str,
    threshold: f64,
    scorer: &dyn RelevanceScorer,
    on_error: FailurePolicy,
) -> Result<FilterOutput, FilterError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(FilterError::Threshold(threshold));
    }
    if context.trim().is_empty() {
        return Err(FilterError::EmptyContext);
    }
    let results = pool::ordered_map(graph.tuples(), scorer.max_in_flight(), |_, t| {
        relevance_score(context, t, scorer)
    });
    let mut kept = KnowledgeGraph::new();
    let mut judgments = Vec::with_capacity(graph.len());
    for (t, r) in graph.iter().zip(results) {
        let j = match r {
            Ok(rel) => RelevanceJudgment {
                tuple: t.clone(),
                score: Some(rel.score),
                keep: rel.score >= threshold,
                flag: rel.flag,
            },
            Err(e) => RelevanceJudgment {
                tuple: t.clone(),
                score: None,
                keep: on_error == FailurePolicy::Open,
                flag: Some(e.to_string()),
            },
        };
        if j.keep {
            kept.push(t.clone());
        }
        judgments.push(j);
    }
    Ok(FilterOutput { kept, judgments })
}

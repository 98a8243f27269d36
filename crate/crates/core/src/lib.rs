//! Commonsense knowledge graph construction from free text.
//!
//! The pipeline extracts candidate heads from text, matches each head to
//! relations worth asking about, has a knowledge model generate tails, and
//! optionally filters the results for relevance to the source text.

pub mod extraction;
pub mod filter;
mod http;
pub mod knowledge;
pub mod matching;
pub mod metrics;
pub mod models;
pub mod pipeline;
mod pool;
pub mod relations;
pub mod text;

pub use extraction::{extract_heads, ExtractedHead, Extractors, HeadForm};
pub use filter::{filter_graph, relevance_score, FailurePolicy, RelevanceJudgment, RelevanceScorer};
pub use http::RetryPolicy;
pub use knowledge::io::{parse_graph, serialize_graph, GraphFormat, ParseOptions};
pub use knowledge::{graph_set_op, KnowledgeGraph, KnowledgeHead, KnowledgeTuple, SetOp};
pub use matching::{match_relations, Matcher, MatcherDataset, MatcherModel};
pub use metrics::{evaluate_model, score_corpus, EvalReport, Metric, MetricParams};
pub use models::{DecodeConfig, KnowledgeModel, StubModel};
pub use pipeline::{infer, Pipeline, PipelineConfig, PipelineError};
pub use relations::{build_few_shot_prompt, KnowledgeRelation, RelationGroup, RelationRegistry};

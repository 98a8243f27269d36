//! Corpus-level generation metrics.

mod bleu;
mod cider;
mod meteor;
mod rouge;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::knowledge::KnowledgeGraph;
use crate::models::{DecodeConfig, Diagnostic, KnowledgeModel, ModelError};

pub use bleu::corpus_bleu;
pub use cider::corpus_cider;
pub use meteor::{meteor_sentence, stem};
pub use rouge::{lcs_len, rouge_l_sentence};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("{candidates} candidates but {references} reference lists")]
    LengthMismatch { candidates: usize, references: usize },
    #[error("item {index} has no references")]
    NoReferences { index: usize },
    #[error("reference graph is empty")]
    EmptyGraph,
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
    #[error("backend returned {found} tuples for {expected} inputs")]
    Misaligned { expected: usize, found: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Bleu,
    RougeL,
    Meteor,
    Cider,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Bleu, Metric::RougeL, Metric::Meteor, Metric::Cider];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Bleu => "bleu",
            Metric::RougeL => "rouge_l",
            Metric::Meteor => "meteor",
            Metric::Cider => "cider",
        }
    }

    /// Parses a comma-separated list such as `bleu,rouge_l`.
    pub fn parse_list(s: &str) -> Result<Vec<Metric>, MetricError> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let m = part.parse()?;
            if !out.contains(&m) {
                out.push(m);
            }
        }
        Ok(out)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bleu" => Ok(Metric::Bleu),
            "rouge_l" | "rouge-l" | "rouge" => Ok(Metric::RougeL),
            "meteor" => Ok(Metric::Meteor),
            "cider" => Ok(Metric::Cider),
            _ => Err(MetricError::UnknownMetric(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricParams {
    pub lowercase: bool,
    /// Highest n-gram order for BLEU and CIDEr.
    pub max_order: usize,
    /// Recall weight of the ROUGE-L F-measure.
    pub rouge_beta: f64,
}

impl Default for MetricParams {
    fn default() -> Self {
        Self {
            lowercase: true,
            max_order: 4,
            rouge_beta: 1.2,
        }
    }
}

pub(crate) fn tokens(text: &str, params: &MetricParams) -> Vec<String> {
    text.split_whitespace()
        .map(|t| if params.lowercase { t.to_lowercase() } else { t.to_string() })
        .collect()
}

pub(crate) fn ngrams(tokens: &[String], n: usize) -> impl Iterator<Item = &[String]> {
    tokens.windows(n.max(1)).filter(move |_| n > 0)
}

/// Mean that does not depend on the order of `xs`.
pub(crate) fn order_free_mean(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.sort_by(f64::total_cmp);
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn check_shapes(candidates: &[String], references: &[Vec<String>]) -> Result<(), MetricError> {
    if candidates.len() != references.len() {
        return Err(MetricError::LengthMismatch {
            candidates: candidates.len(),
            references: references.len(),
        });
    }
    if let Some(index) = references.iter().position(Vec::is_empty) {
        return Err(MetricError::NoReferences { index });
    }
    Ok(())
}

/// Scores a corpus of candidates, each against its own reference list.
pub fn score_corpus(
    metric: Metric,
    candidates: &[String],
    references: &[Vec<String>],
    params: &MetricParams,
) -> Result<f64, MetricError> {
    check_shapes(candidates, references)?;
    let cand: Vec<Vec<String>> = candidates.iter().map(|c| tokens(c, params)).collect();
    let refs: Vec<Vec<Vec<String>>> = references
        .iter()
        .map(|rs| rs.iter().map(|r| tokens(r, params)).collect())
        .collect();
    Ok(match metric {
        Metric::Bleu => corpus_bleu(&cand, &refs, params.max_order),
        Metric::RougeL => order_free_mean(
            cand.iter()
                .zip(&refs)
                .map(|(c, rs)| rs.iter().map(|r| rouge_l_sentence(c, r, params.rouge_beta)).fold(0.0, f64::max))
                .collect(),
        ),
        Metric::Meteor => order_free_mean(
            cand.iter()
                .zip(&refs)
                .map(|(c, rs)| rs.iter().map(|r| meteor_sentence(c, r)).fold(0.0, f64::max))
                .collect(),
        ),
        Metric::Cider => corpus_cider(&cand, &refs, params.max_order),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scores: BTreeMap<Metric, f64>,
    pub candidates: usize,
    pub references: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<Diagnostic>,
}

/// Strips the reference tails, regenerates them with `model`, and scores the
/// first generated tail of each tuple against all its reference tails. A
/// tuple the backend failed on scores as an empty candidate.
pub fn evaluate_model(
    model: &dyn KnowledgeModel,
    refs: &KnowledgeGraph,
    metrics: &[Metric],
    decode: &DecodeConfig,
    params: &MetricParams,
) -> Result<EvalReport, MetricError> {
    if refs.is_empty() {
        return Err(MetricError::EmptyGraph);
    }
    if let Some(index) = refs.iter().position(|t| t.tails.is_empty()) {
        return Err(MetricError::NoReferences { index });
    }
    let generation = model.generate(&refs.strip_tails(), decode)?;
    if generation.graph.len() != refs.len() {
        return Err(MetricError::Misaligned {
            expected: refs.len(),
            found: generation.graph.len(),
        });
    }
    let candidates: Vec<String> = generation
        .graph
        .iter()
        .map(|t| t.tails.first().cloned().unwrap_or_default())
        .collect();
    let references: Vec<Vec<String>> = refs.iter().map(|t| t.tails.clone()).collect();
    let mut scores = BTreeMap::new();
    for &m in metrics {
        scores.insert(m, score_corpus(m, &candidates, &references, params)?);
    }
    Ok(EvalReport {
        scores,
        candidates: candidates.len(),
        references: references.iter().map(Vec::len).sum(),
        diagnostics: generation.diagnostics,
    })
}

//! Relation matching: pairing heads with the relations worth prompting for.

pub mod dataset;
pub mod embeddings;
pub mod evaluate;
pub mod resplit;
pub mod swem;

use std::collections::HashSet;

use thiserror::Error;

use crate::extraction::HeadForm;
use crate::knowledge::KnowledgeHead;
use crate::relations::{RelationGroup, RelationRegistry};
use crate::text::{tag, PosTag};

pub use dataset::{GroupLabels, MatcherDataset, MatcherExample};
pub use embeddings::{mean_pool, Embeddings, HashingEmbedder, TokenEmbedder};
pub use evaluate::{evaluate_matcher, GroupScores, MatcherScores};
pub use resplit::{compute_overlap, group_counts, resplit_dataset, OverlapReport, ResplitConfig};
pub use swem::{train_swem_matcher, MatcherModel, TrainConfig, TrainReport};

#[derive(Debug, Error)]
pub enum MatchError {
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("embedding dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("model file: {0}")]
    ModelFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("model matcher selected but no matcher model is loaded")]
    NoModel,
    #[error("infeasible split: {0}")]
    Infeasible(String),
    #[error("relation registry is empty")]
    EmptyRegistry,
}

/// Guesses the syntactic form of a head that did not come from extraction.
///
/// A head opening with a verb is a verb phrase; a subject followed later by
/// a verb is a sentence; anything else is a noun phrase.
pub fn classify_head_form(head: &KnowledgeHead) -> HeadForm {
    let tokens: Vec<PosTag> = tag(head.text())
        .into_iter()
        .map(|t| t.tag)
        .filter(|t| *t != PosTag::Punct)
        .collect();
    match tokens.first() {
        Some(PosTag::Verb) => HeadForm::VerbPhrase,
        _ => {
            let subject = tokens.iter().position(|t| matches!(t, PosTag::Noun | PosTag::Pron));
            match subject {
                Some(s) if tokens[s + 1..].contains(&PosTag::Verb) => HeadForm::Sentence,
                _ => HeadForm::NounPhrase,
            }
        }
    }
}

fn heuristic_labels(head: &KnowledgeHead) -> GroupLabels {
    match classify_head_form(head) {
        HeadForm::NounPhrase => GroupLabels::from_groups([RelationGroup::Physical]),
        _ => GroupLabels::from_groups([RelationGroup::Social, RelationGroup::Event]),
    }
}

/// The three matching strategies.
#[derive(Debug, Clone, Copy)]
pub enum Matcher<'a> {
    /// Every registered relation for every head.
    Base,
    /// Noun phrases to physical relations, everything else to social and event.
    Heuristic,
    Model(&'a MatcherModel),
}

impl Matcher<'_> {
    /// Predicted groups as used for evaluation. The model variant reports its
    /// raw thresholded output, which may be empty.
    pub fn predict_labels(&self, head: &str) -> GroupLabels {
        match self {
            Matcher::Base => GroupLabels::ALL,
            Matcher::Heuristic => match KnowledgeHead::new(head) {
                Ok(h) => heuristic_labels(&h),
                Err(_) => GroupLabels::default(),
            },
            Matcher::Model(m) => m.predict_labels(head),
        }
    }

    fn groups_for(&self, head: &KnowledgeHead) -> GroupLabels {
        match self {
            Matcher::Base => GroupLabels::ALL,
            Matcher::Heuristic => heuristic_labels(head),
            Matcher::Model(m) => {
                let labels = m.predict_labels(head.text());
                if labels.is_empty() {
                    heuristic_labels(head)
                } else {
                    labels
                }
            }
        }
    }
}

/// Pairs each head with the relations its matched groups allow.
///
/// Output order is head order, then registry order. The base matcher also
/// returns custom-group relations; the others only return relations of the
/// matched groups. `subset` restricts the candidate relations and may use
/// alias names.
pub fn match_relations(
    heads: &[KnowledgeHead],
    matcher: &Matcher<'_>,
    registry: &RelationRegistry,
    subset: Option<&[String]>,
) -> Result<Vec<(KnowledgeHead, String)>, MatchError> {
    if registry.is_empty() {
        return Err(MatchError::EmptyRegistry);
    }
    let allowed: Option<HashSet<&str>> = match subset {
        None => None,
        Some(names) => Some(
            names
                .iter()
                .map(|n| {
                    registry
                        .resolve(n)
                        .map(|r| r.name.as_str())
                        .ok_or_else(|| MatchError::UnknownRelation(n.clone()))
                })
                .collect::<Result<_, _>>()?,
        ),
    };
    let mut seen = HashSet::new();
    let mut pairs = Vec::new();
    for head in heads {
        let groups = matcher.groups_for(head);
        for rel in registry.iter() {
            let keep = match matcher {
                Matcher::Base => true,
                _ => groups.get(rel.group),
            };
            if !keep || allowed.as_ref().is_some_and(|a| !a.contains(rel.name.as_str())) {
                continue;
            }
            if seen.insert((head.text().to_string(), rel.name.clone())) {
                pairs.push((head.clone(), rel.name.clone()));
            }
        }
    }
    Ok(pairs)
}

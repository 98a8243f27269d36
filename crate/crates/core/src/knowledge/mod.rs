//! Knowledge tuples and graphs.
//!
//! A [`KnowledgeTuple`] is one `(head, relation, tails)` fact. Two tuples are
//! equal when head text, relation name and the *set* of tails coincide; tail
//! order and repeated tails do not matter. A [`KnowledgeGraph`] stores tuples
//! in insertion order (duplicates allowed) and collapses duplicates only when
//! a set operation is applied.

pub mod io;

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::{Add, BitAnd, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{parse_graph, serialize_graph, CsvOptions, GraphFormat, JsonlOptions, ParseOptions};

#[derive(Debug, Error)]
pub enum KnowledgeError {
    #[error("knowledge head must not be empty")]
    EmptyHead,
    #[error("relation name must not be empty")]
    EmptyRelation,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown graph format `{0}` (expected csv or jsonl)")]
    UnknownFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Surface text of a head entity, trimmed and guaranteed non-empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct KnowledgeHead(String);

impl KnowledgeHead {
    pub fn new(text: impl AsRef<str>) -> Result<Self, KnowledgeError> {
        let trimmed = text.as_ref().trim();
        if trimmed.is_empty() {
            return Err(KnowledgeError::EmptyHead);
        }
        Ok(Self(trimmed.to_string()))
    }

    pub fn text(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for KnowledgeHead {
    type Error = KnowledgeError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<KnowledgeHead> for String {
    fn from(head: KnowledgeHead) -> Self {
        head.0
    }
}

impl AsRef<str> for KnowledgeHead {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for KnowledgeHead {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KnowledgeTuple {
    pub head: KnowledgeHead,
    pub relation: String,
    #[serde(default)]
    pub tails: Vec<String>,
}

impl KnowledgeTuple {
    pub fn new(
        head: KnowledgeHead,
        relation: impl Into<String>,
        tails: Vec<String>,
    ) -> Result<Self, KnowledgeError> {
        let relation = relation.into();
        if relation.trim().is_empty() {
            return Err(KnowledgeError::EmptyRelation);
        }
        Ok(Self {
            head,
            relation,
            tails,
        })
    }

    /// Convenience constructor that validates the head text as well.
    pub fn from_parts<S: Into<String>>(
        head: &str,
        relation: &str,
        tails: impl IntoIterator<Item = S>,
    ) -> Result<Self, KnowledgeError> {
        Self::new(
            KnowledgeHead::new(head)?,
            relation,
            tails.into_iter().map(Into::into).collect(),
        )
    }

    /// The same `(head, relation)` pair with no tails.
    pub fn without_tails(&self) -> Self {
        Self {
            head: self.head.clone(),
            relation: self.relation.clone(),
            tails: Vec::new(),
        }
    }

    fn tail_set(&self) -> BTreeSet<&str> {
        self.tails.iter().map(String::as_str).collect()
    }
}

impl PartialEq for KnowledgeTuple {
    fn eq(&self, other: &Self) -> bool {
        self.head == other.head
            && self.relation == other.relation
            && self.tail_set() == other.tail_set()
    }
}

impl Eq for KnowledgeTuple {}

impl Hash for KnowledgeTuple {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.head.hash(state);
        self.relation.hash(state);
        for tail in self.tail_set() {
            tail.hash(state);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetOp {
    Union,
    Intersection,
    Difference,
}

/// Ordered collection of knowledge tuples.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KnowledgeGraph {
    tuples: Vec<KnowledgeTuple>,
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, tuple: KnowledgeTuple) {
        self.tuples.push(tuple);
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, KnowledgeTuple> {
        self.tuples.iter()
    }

    pub fn tuples(&self) -> &[KnowledgeTuple] {
        &self.tuples
    }

    pub fn into_tuples(self) -> Vec<KnowledgeTuple> {
        self.tuples
    }

    /// Duplicate-free copy keeping the first occurrence of every tuple.
    pub fn deduplicated(&self) -> Self {
        let mut seen = HashSet::new();
        self.tuples
            .iter()
            .filter(|t| seen.insert(*t))
            .cloned()
            .collect()
    }

    pub fn contains(&self, tuple: &KnowledgeTuple) -> bool {
        self.tuples.contains(tuple)
    }

    /// Set equality under tuple equality, ignoring order and duplicates.
    pub fn set_eq(&self, other: &Self) -> bool {
        let a: HashSet<_> = self.tuples.iter().collect();
        let b: HashSet<_> = other.tuples.iter().collect();
        a == b
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        let b: HashSet<_> = other.tuples.iter().collect();
        self.tuples.iter().all(|t| b.contains(t))
    }

    pub fn union(&self, other: &Self) -> Self {
        graph_set_op(SetOp::Union, self, other)
    }

    pub fn intersection(&self, other: &Self) -> Self {
        graph_set_op(SetOp::Intersection, self, other)
    }

    pub fn difference(&self, other: &Self) -> Self {
        graph_set_op(SetOp::Difference, self, other)
    }

    /// Copy of the graph with every tail list cleared.
    pub fn strip_tails(&self) -> Self {
        self.tuples.iter().map(KnowledgeTuple::without_tails).collect()
    }
}

/// Applies a set operation under tuple equality.
///
/// Results are duplicate-free and follow the first operand's order; for
/// unions, elements only present in `b` follow in `b`'s order.
pub fn graph_set_op(kind: SetOp, a: &KnowledgeGraph, b: &KnowledgeGraph) -> KnowledgeGraph {
    let in_b: HashSet<&KnowledgeTuple> = b.tuples.iter().collect();
    let mut seen: HashSet<&KnowledgeTuple> = HashSet::new();
    let mut out = KnowledgeGraph::new();
    for t in &a.tuples {
        let keep = match kind {
            SetOp::Union => true,
            SetOp::Intersection => in_b.contains(t),
            SetOp::Difference => !in_b.contains(t),
        };
        if keep && seen.insert(t) {
            out.push(t.clone());
        }
    }
    if kind == SetOp::Union {
        for t in &b.tuples {
            if seen.insert(t) {
                out.push(t.clone());
            }
        }
    }
    out
}

impl FromIterator<KnowledgeTuple> for KnowledgeGraph {
    fn from_iter<I: IntoIterator<Item = KnowledgeTuple>>(iter: I) -> Self {
        Self {
            tuples: iter.into_iter().collect(),
        }
    }
}

impl IntoIterator for KnowledgeGraph {
    type Item = KnowledgeTuple;
    type IntoIter = std::vec::IntoIter<KnowledgeTuple>;

    fn into_iter(self) -> Self::IntoIter {
        self.tuples.into_iter()
    }
}

impl<'a> IntoIterator for &'a KnowledgeGraph {
    type Item = &'a KnowledgeTuple;
    type IntoIter = std::slice::Iter<'a, KnowledgeTuple>;

    fn into_iter(self) -> Self::IntoIter {
        self.tuples.iter()
    }
}

impl Add for &KnowledgeGraph {
    type Output = KnowledgeGraph;

    fn add(self, rhs: Self) -> KnowledgeGraph {
        self.union(rhs)
    }
}

impl BitAnd for &KnowledgeGraph {
    type Output = KnowledgeGraph;

    fn bitand(self, rhs: Self) -> KnowledgeGraph {
        self.intersection(rhs)
    }
}

impl Sub for &KnowledgeGraph {
    type Output = KnowledgeGraph;

    fn sub(self, rhs: Self) -> KnowledgeGraph {
        self.difference(rhs)
    }
}

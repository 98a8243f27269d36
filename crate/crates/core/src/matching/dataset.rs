use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use super::MatchError;
use crate::knowledge::KnowledgeGraph;
use crate::relations::{RelationGroup, RelationRegistry};

/// Multi-label target over the three matchable relation groups.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct GroupLabels {
    pub physical: bool,
    pub social: bool,
    pub event: bool,
}

impl GroupLabels {
    pub const ALL: GroupLabels = GroupLabels {
        physical: true,
        social: true,
        event: true,
    };

    pub fn from_groups<I: IntoIterator<Item = RelationGroup>>(groups: I) -> Self {
        let mut l = Self::default();
        for g in groups {
            l.set(g, true);
        }
        l
    }

    /// Flags in logit order (physical, social, event).
    pub fn as_array(&self) -> [bool; 3] {
        [self.physical, self.social, self.event]
    }

    pub fn from_array(a: [bool; 3]) -> Self {
        Self {
            physical: a[0],
            social: a[1],
            event: a[2],
        }
    }

    pub fn get(&self, g: RelationGroup) -> bool {
        match g {
            RelationGroup::Physical => self.physical,
            RelationGroup::Social => self.social,
            RelationGroup::Event => self.event,
            RelationGroup::Custom => false,
        }
    }

    pub fn set(&mut self, g: RelationGroup, value: bool) {
        match g {
            RelationGroup::Physical => self.physical = value,
            RelationGroup::Social => self.social = value,
            RelationGroup::Event => self.event = value,
            RelationGroup::Custom => {}
        }
    }

    pub fn groups(&self) -> Vec<RelationGroup> {
        RelationGroup::MATCHABLE
            .into_iter()
            .filter(|g| self.get(*g))
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        !(self.physical || self.social || self.event)
    }

    pub fn is_subset(&self, other: &GroupLabels) -> bool {
        self.as_array()
            .iter()
            .zip(other.as_array())
            .all(|(a, b)| !a || b)
    }
}

impl Serialize for GroupLabels {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.groups().serialize(s)
    }
}

impl<'de> Deserialize<'de> for GroupLabels {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let groups = Vec::<RelationGroup>::deserialize(d)?;
        if groups.contains(&RelationGroup::Custom) {
            return Err(serde::de::Error::custom("label must be physical, social or event"));
        }
        Ok(GroupLabels::from_groups(groups))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatcherExample {
    pub head: String,
    pub labels: GroupLabels,
}

/// Labelled heads for training and evaluating relation matchers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MatcherDataset {
    examples: Vec<MatcherExample>,
}

impl MatcherDataset {
    /// Validates non-empty heads, at least one label, and unique head texts.
    pub fn new(examples: Vec<MatcherExample>) -> Result<Self, MatchError> {
        let mut seen = HashSet::new();
        for (i, ex) in examples.iter().enumerate() {
            if ex.head.trim().is_empty() {
                return Err(MatchError::InvalidDataset(format!("example {i} has an empty head")));
            }
            if ex.labels.is_empty() {
                return Err(MatchError::InvalidDataset(format!(
                    "example {i} (`{}`) has no labels",
                    ex.head
                )));
            }
            if !seen.insert(ex.head.as_str()) {
                return Err(MatchError::InvalidDataset(format!("duplicate head `{}`", ex.head)));
            }
        }
        Ok(Self { examples })
    }

    pub fn examples(&self) -> &[MatcherExample] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, MatcherExample> {
        self.examples.iter()
    }

    /// One example per distinct head; a group is positive when the head is
    /// connected to any relation of that group. Unknown or custom relations
    /// are ignored, as are heads left without labels.
    pub fn from_graph(graph: &KnowledgeGraph, registry: &RelationRegistry) -> Self {
        let mut labels: BTreeMap<&str, (usize, GroupLabels)> = BTreeMap::new();
        for (pos, t) in graph.iter().enumerate() {
            let entry = labels
                .entry(t.head.text())
                .or_insert((pos, GroupLabels::default()));
            if let Some(g) = registry.group_of(&t.relation) {
                entry.1.set(g, true);
            }
        }
        let mut rows: Vec<(usize, MatcherExample)> = labels
            .into_iter()
            .filter(|(_, (_, l))| !l.is_empty())
            .map(|(h, (pos, l))| {
                (
                    pos,
                    MatcherExample {
                        head: h.to_string(),
                        labels: l,
                    },
                )
            })
            .collect();
        rows.sort_by_key(|(pos, _)| *pos);
        Self {
            examples: rows.into_iter().map(|(_, e)| e).collect(),
        }
    }

    pub fn read_jsonl<R: Read>(source: R) -> Result<Self, MatchError> {
        let mut examples = Vec::new();
        for (i, line) in BufReader::new(source).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let ex: MatcherExample = serde_json::from_str(&line).map_err(|e| MatchError::Format {
                line: i + 1,
                message: e.to_string(),
            })?;
            examples.push(ex);
        }
        Self::new(examples)
    }

    pub fn write_jsonl<W: Write>(&self, mut sink: W) -> Result<(), MatchError> {
        for ex in &self.examples {
            serde_json::to_writer(&mut sink, ex).map_err(std::io::Error::other)?;
            sink.write_all(b"\n")?;
        }
        sink.flush()?;
        Ok(())
    }
}

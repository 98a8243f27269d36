//! Relation inventory, verbalizers and few-shot prompt assembly.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::knowledge::{KnowledgeGraph, KnowledgeHead};

/// Version tag of the built-in inventory below.
pub const INVENTORY_VERSION: &str = "atomic2020-v1";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RelationError {
    #[error("relation `{0}` is already registered")]
    Duplicate(String),
    #[error("unknown relation `{0}`")]
    Unknown(String),
    #[error("unknown relation group `{0}`")]
    UnknownGroup(String),
    #[error("few-shot prompting needs at least one sample tuple")]
    NoSamples,
    #[error("sample {index} uses relation `{found}`, expected `{expected}`")]
    SampleRelation {
        index: usize,
        expected: String,
        found: String,
    },
    #[error("sample {index} has no tail")]
    SampleWithoutTail { index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationGroup {
    Physical,
    Social,
    Event,
    Custom,
}

impl RelationGroup {
    /// The three groups a relation matcher predicts, in logit order.
    pub const MATCHABLE: [RelationGroup; 3] =
        [RelationGroup::Physical, RelationGroup::Social, RelationGroup::Event];

    pub fn as_str(self) -> &'static str {
        match self {
            RelationGroup::Physical => "physical",
            RelationGroup::Social => "social",
            RelationGroup::Event => "event",
            RelationGroup::Custom => "custom",
        }
    }
}

impl fmt::Display for RelationGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RelationGroup {
    type Err = RelationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "physical" => Ok(Self::Physical),
            "social" => Ok(Self::Social),
            "event" => Ok(Self::Event),
            "custom" => Ok(Self::Custom),
            other => Err(RelationError::UnknownGroup(other.to_string())),
        }
    }
}

type VerbalizeFn = dyn Fn(&str, Option<&str>, Option<usize>) -> String + Send + Sync;

/// Turns `(head, tail?, index?)` into prompt text.
#[derive(Clone)]
pub enum Verbalizer {
    /// `"{head} {relation-name}"`, followed by the tail when present.
    Default,
    /// Template with `{head}`, `{subject}` (first word of the head),
    /// `{index}` and optionally `{tail}` placeholders. Without a `{tail}`
    /// placeholder the tail is appended after a space.
    Template(String),
    Custom(Arc<VerbalizeFn>),
}

impl fmt::Debug for Verbalizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verbalizer::Default => f.write_str("Default"),
            Verbalizer::Template(t) => f.debug_tuple("Template").field(t).finish(),
            Verbalizer::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

fn render_template(template: &str, head: &str, tail: Option<&str>, index: Option<usize>) -> String {
    let subject = head.split_whitespace().next().unwrap_or(head);
    let index_txt = index.map(|i| i.to_string()).unwrap_or_default();
    let base = template
        .replace("{head}", head)
        .replace("{subject}", subject)
        .replace("{index}", &index_txt);
    if base.contains("{tail}") {
        base.replace("{tail}", tail.unwrap_or("")).trim_end().to_string()
    } else {
        append_tail(base, tail)
    }
}

fn append_tail(mut text: String, tail: Option<&str>) -> String {
    if let Some(tail) = tail.filter(|t| !t.is_empty()) {
        text.push(' ');
        text.push_str(tail);
    }
    text
}

#[derive(Debug, Clone)]
pub struct KnowledgeRelation {
    pub name: String,
    pub group: RelationGroup,
    pub verbalizer: Verbalizer,
    /// Task preamble placed before few-shot samples.
    pub instruction: Option<String>,
}

impl KnowledgeRelation {
    pub fn new(name: impl Into<String>, group: RelationGroup) -> Self {
        Self {
            name: name.into(),
            group,
            verbalizer: Verbalizer::Default,
            instruction: None,
        }
    }

    pub fn with_template(mut self, template: impl Into<String>) -> Self {
        self.verbalizer = Verbalizer::Template(template.into());
        self
    }

    pub fn with_verbalizer<F>(mut self, f: F) -> Self
    where
        F: Fn(&str, Option<&str>, Option<usize>) -> String + Send + Sync + 'static,
    {
        self.verbalizer = Verbalizer::Custom(Arc::new(f));
        self
    }

    pub fn with_instruction(mut self, instruction: impl Into<String>) -> Self {
        self.instruction = Some(instruction.into());
        self
    }

    pub fn verbalize(&self, head: &str, tail: Option<&str>, index: Option<usize>) -> String {
        match &self.verbalizer {
            Verbalizer::Default => append_tail(format!("{} {}", head, self.name), tail),
            Verbalizer::Template(t) => render_template(t, head, tail, index),
            Verbalizer::Custom(f) => f(head, tail, index),
        }
    }

    pub fn from_spec(spec: &RelationSpec) -> Self {
        let mut rel = KnowledgeRelation::new(&spec.name, spec.group);
        if let Some(t) = &spec.template {
            rel = rel.with_template(t);
        }
        if let Some(i) = &spec.instruction {
            rel = rel.with_instruction(i);
        }
        rel
    }
}

/// Declarative relation definition, as read from a configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationSpec {
    pub name: String,
    #[serde(default = "custom_group")]
    pub group: RelationGroup,
    #[serde(default)]
    pub instruction: Option<String>,
    #[serde(default)]
    pub template: Option<String>,
}

fn custom_group() -> RelationGroup {
    RelationGroup::Custom
}

/// Verbalizes a relation by name, falling back to the default template for
/// names the registry does not know.
pub fn verbalize(
    registry: &RelationRegistry,
    relation: &str,
    head: &str,
    tail: Option<&str>,
    index: Option<usize>,
) -> String {
    match registry.resolve(relation) {
        Some(rel) => rel.verbalize(head, tail, index),
        None => KnowledgeRelation::new(relation, RelationGroup::Custom).verbalize(head, tail, index),
    }
}

/// ATOMIC2020 relations with their group and verbalization template.
const ATOMIC2020: &[(&str, RelationGroup, &str)] = &[
    ("ObjectUse", RelationGroup::Physical, "{head} is used for"),
    ("AtLocation", RelationGroup::Physical, "{head} is located at"),
    ("MadeUpOf", RelationGroup::Physical, "{head} is made up of"),
    ("HasProperty", RelationGroup::Physical, "{head} has the property of being"),
    ("CapableOf", RelationGroup::Physical, "{head} is capable of"),
    ("Desires", RelationGroup::Physical, "{head} desires"),
    ("NotDesires", RelationGroup::Physical, "{head} does not desire"),
    ("xNeed", RelationGroup::Social, "{head}. Before that, {subject} needs"),
    ("xAttr", RelationGroup::Social, "{head}. {subject} is seen as"),
    ("xEffect", RelationGroup::Social, "{head}. As a result, {subject} will"),
    ("xReact", RelationGroup::Social, "{head}. As a result, {subject} feels"),
    ("xWant", RelationGroup::Social, "{head}. As a result, {subject} wants"),
    ("xIntent", RelationGroup::Social, "{head}. {subject} did this because they wanted"),
    ("oEffect", RelationGroup::Social, "{head}. As a result, others will"),
    ("oReact", RelationGroup::Social, "{head}. As a result, others feel"),
    ("oWant", RelationGroup::Social, "{head}. As a result, others want"),
    ("IsAfter", RelationGroup::Event, "{head}. This happens after"),
    ("HasSubEvent", RelationGroup::Event, "{head}. This includes"),
    ("IsBefore", RelationGroup::Event, "{head}. This happens before"),
    ("HinderedBy", RelationGroup::Event, "{head}. This can be hindered by"),
    ("Causes", RelationGroup::Event, "{head}. This causes"),
    ("xReason", RelationGroup::Event, "{head}. This happens because"),
    ("isFilledBy", RelationGroup::Event, "{head}. The blank can be filled by"),
];

/// Alternative spellings and ConceptNet names mapped onto inventory names.
const ALIASES: &[(&str, &str)] = &[
    ("xWants", "xWant"),
    ("oWants", "oWant"),
    ("UsedFor", "ObjectUse"),
    ("MadeOf", "MadeUpOf"),
    ("PartOf", "MadeUpOf"),
    ("ReceivesAction", "ObjectUse"),
    ("LocatedNear", "AtLocation"),
];

#[derive(Debug, Clone, Default)]
pub struct RelationRegistry {
    relations: Vec<KnowledgeRelation>,
    by_name: HashMap<String, usize>,
    aliases: HashMap<String, String>,
}

impl RelationRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The 23 ATOMIC2020 relations plus ConceptNet aliases.
    pub fn builtin() -> Self {
        let mut reg = Self::empty();
        for (name, group, template) in ATOMIC2020 {
            reg.register(KnowledgeRelation::new(*name, *group).with_template(*template))
                .expect("built-in names are unique");
        }
        for (alias, target) in ALIASES {
            reg.aliases.insert((*alias).to_string(), (*target).to_string());
        }
        reg
    }

    pub fn register(&mut self, rel: KnowledgeRelation) -> Result<(), RelationError> {
        if self.by_name.contains_key(&rel.name) || self.aliases.contains_key(&rel.name) {
            return Err(RelationError::Duplicate(rel.name));
        }
        self.by_name.insert(rel.name.clone(), self.relations.len());
        self.relations.push(rel);
        Ok(())
    }

    /// Consuming variant of [`register`](Self::register).
    pub fn with(mut self, rel: KnowledgeRelation) -> Result<Self, RelationError> {
        self.register(rel)?;
        Ok(self)
    }

    pub fn get(&self, name: &str) -> Option<&KnowledgeRelation> {
        self.by_name.get(name).map(|&i| &self.relations[i])
    }

    /// Looks up a name, following aliases.
    pub fn resolve(&self, name: &str) -> Option<&KnowledgeRelation> {
        self.get(name)
            .or_else(|| self.aliases.get(name).and_then(|target| self.get(target)))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.resolve(name).is_some()
    }

    /// Relations in registration order.
    pub fn iter(&self) -> impl Iterator<Item = &KnowledgeRelation> {
        self.relations.iter()
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    pub fn names_in_group(&self, group: RelationGroup) -> Vec<&str> {
        self.relations
            .iter()
            .filter(|r| r.group == group)
            .map(|r| r.name.as_str())
            .collect()
    }

    pub fn group_of(&self, name: &str) -> Option<RelationGroup> {
        self.resolve(name).map(|r| r.group)
    }
}

/// Instruction line, one verbalized line per sample (1-based index, first
/// tail only), then the query head with the next index and no tail.
pub fn build_few_shot_prompt(
    rel: &KnowledgeRelation,
    samples: &KnowledgeGraph,
    query_head: &KnowledgeHead,
) -> Result<String, RelationError> {
    if samples.is_empty() {
        return Err(RelationError::NoSamples);
    }
    let mut lines = Vec::with_capacity(samples.len() + 2);
    if let Some(instruction) = &rel.instruction {
        lines.push(instruction.clone());
    }
    for (i, sample) in samples.iter().enumerate() {
        if sample.relation != rel.name {
            return Err(RelationError::SampleRelation {
                index: i,
                expected: rel.name.clone(),
                found: sample.relation.clone(),
            });
        }
        let tail = sample
            .tails
            .first()
            .ok_or(RelationError::SampleWithoutTail { index: i })?;
        lines.push(rel.verbalize(sample.head.text(), Some(tail), Some(i + 1)));
    }
    lines.push(rel.verbalize(query_head.text(), None, Some(samples.len() + 1)));
    Ok(lines.join("\n"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knowledge::KnowledgeTuple;

    fn x_wishes() -> KnowledgeRelation {
        KnowledgeRelation::new("xWishes", RelationGroup::Custom)
            .with_template("Situation {index}: {head}. As a result, {subject} wishes")
            .with_instruction("How does the situation affect the character's wishes?")
    }

    #[test]
    fn builtin_inventory_partitions_into_three_groups() {
        let reg = RelationRegistry::builtin();
        assert_eq!(reg.len(), 23);
        let sizes: Vec<usize> = RelationGroup::MATCHABLE
            .iter()
            .map(|g| reg.names_in_group(*g).len())
            .collect();
        assert_eq!(sizes, [7, 9, 7]);
        assert!(reg.names_in_group(RelationGroup::Custom).is_empty());
    }

    #[test]
    fn aliases_resolve_to_inventory_entries() {
        let reg = RelationRegistry::builtin();
        assert_eq!(reg.resolve("UsedFor").unwrap().name, "ObjectUse");
        assert_eq!(reg.resolve("xWants").unwrap().name, "xWant");
        assert!(reg.get("UsedFor").is_none());
    }

    #[test]
    fn register_and_lookup() {
        let mut reg = RelationRegistry::builtin();
        reg.register(x_wishes()).unwrap();
        let rel = reg.get("xWishes").unwrap();
        assert_eq!(rel.group, RelationGroup::Custom);
        assert_eq!(reg.names_in_group(RelationGroup::Custom), ["xWishes"]);
        assert_eq!(
            reg.register(x_wishes()).unwrap_err(),
            RelationError::Duplicate("xWishes".into())
        );
        assert!(matches!(
            reg.register(KnowledgeRelation::new("UsedFor", RelationGroup::Custom)),
            Err(RelationError::Duplicate(_))
        ));
    }

    #[test]
    fn template_verbalizer() {
        let rel = x_wishes();
        assert_eq!(
            rel.verbalize("John is at a party", Some("to drink beer and dance"), Some(1)),
            "Situation 1: John is at a party. As a result, John wishes to drink beer and dance"
        );
        assert_eq!(
            rel.verbalize("Isaac makes a huge mistake", None, Some(6)),
            "Situation 6: Isaac makes a huge mistake. As a result, Isaac wishes"
        );
    }

    #[test]
    fn default_verbalizer() {
        let rel = KnowledgeRelation::new("r", RelationGroup::Custom);
        assert_eq!(rel.verbalize("h", Some("t"), None), "h r t");
        assert_eq!(rel.verbalize("h", None, None), "h r");
        let reg = RelationRegistry::empty();
        assert_eq!(verbalize(&reg, "r", "h", Some("t"), None), "h r t");
    }

    #[test]
    fn explicit_tail_placeholder() {
        let rel = KnowledgeRelation::new("r", RelationGroup::Custom).with_template("[{head}] -> {tail}");
        assert_eq!(rel.verbalize("h", Some("t"), None), "[h] -> t");
        assert_eq!(rel.verbalize("h", None, None), "[h] ->");
    }

    #[test]
    fn custom_closure_verbalizer() {
        let rel = KnowledgeRelation::new("r", RelationGroup::Custom)
            .with_verbalizer(|h, _, i| format!("{}#{}", h, i.unwrap_or(0)));
        assert_eq!(rel.verbalize("h", None, Some(3)), "h#3");
    }

    #[test]
    fn prompt_with_one_sample_has_three_lines() {
        let samples: KnowledgeGraph = [KnowledgeTuple::from_parts("A runs", "xWishes", ["to rest"]).unwrap()]
            .into_iter()
            .collect();
        let prompt = build_few_shot_prompt(&x_wishes(), &samples, &KnowledgeHead::new("B falls").unwrap())
            .unwrap();
        let lines: Vec<&str> = prompt.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[2], "Situation 2: B falls. As a result, B wishes");
    }

    #[test]
    fn prompt_validation() {
        let rel = x_wishes();
        let q = KnowledgeHead::new("q").unwrap();
        assert_eq!(
            build_few_shot_prompt(&rel, &KnowledgeGraph::new(), &q).unwrap_err(),
            RelationError::NoSamples
        );
        let wrong: KnowledgeGraph = [KnowledgeTuple::from_parts("h", "xNeed", ["t"]).unwrap()]
            .into_iter()
            .collect();
        assert!(matches!(
            build_few_shot_prompt(&rel, &wrong, &q),
            Err(RelationError::SampleRelation { index: 0, .. })
        ));
        let tailless: KnowledgeGraph = [KnowledgeTuple::from_parts("h", "xWishes", Vec::<String>::new()).unwrap()]
            .into_iter()
            .collect();
        assert_eq!(
            build_few_shot_prompt(&rel, &tailless, &q).unwrap_err(),
            RelationError::SampleWithoutTail { index: 0 }
        );
    }

    #[test]
    fn spec_round_trips_through_toml() {
        let spec: RelationSpec = toml::from_str(
            "name = \"xWishes\"\ntemplate = \"Situation {index}: {head}.\"\n",
        )
        .unwrap();
        assert_eq!(spec.group, RelationGroup::Custom);
        let rel = KnowledgeRelation::from_spec(&spec);
        assert_eq!(rel.verbalize("h", None, Some(2)), "Situation 2: h.");
    }
}

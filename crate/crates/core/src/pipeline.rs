//! End-to-end inference: extract, match, generate, filter.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::extraction::{extract_heads, ExtractionError, Extractors};
use crate::filter::{
    filter_graph, EmbeddingCosineScorer, ExternalScorer, FailurePolicy, FilterError, RelevanceJudgment,
    RelevanceScorer, DEFAULT_THRESHOLD,
};
use crate::http::RetryPolicy;
use crate::knowledge::io::{parse_graph, GraphFormat, ParseOptions};
use crate::knowledge::{KnowledgeError, KnowledgeGraph, KnowledgeHead, KnowledgeTuple};
use crate::matching::{match_relations, Embeddings, HashingEmbedder, MatchError, Matcher, MatcherModel, TokenEmbedder};
use crate::models::{ApiConfig, ApiModel, DecodeConfig, Diagnostic, KnowledgeModel, ModelError, StubModel};
use crate::relations::{KnowledgeRelation, RelationError, RelationRegistry, RelationSpec};

/// Dimension of the hashing embedder used when no embedding file is given.
pub const FALLBACK_EMBEDDING_DIM: usize = 100;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("extraction: {0}")]
    Extraction(#[from] ExtractionError),
    #[error("matching: {0}")]
    Matching(#[from] MatchError),
    #[error("generation: {0}")]
    Generation(#[from] ModelError),
    #[error("filtering: {0}")]
    Filter(#[from] FilterError),
    #[error("relations: {0}")]
    Relation(#[from] RelationError),
    #[error("input: {0}")]
    Knowledge(#[from] KnowledgeError),
}

macro_rules! choice_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name {
            #[default]
            $($variant),+
        }

        impl FromStr for $name {
            type Err = PipelineError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s.to_ascii_lowercase().as_str() {
                    $($text => Ok(Self::$variant),)+
                    other => Err(PipelineError::Config(format!(
                        concat!("unknown ", stringify!($name), " `{}`"),
                        other
                    ))),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self {
                    $(Self::$variant => $text),+
                })
            }
        }
    };
}

// The first variant of each is the default.
choice_enum!(MatcherKind { Heuristic => "heuristic", Base => "base", Model => "model" });
choice_enum!(BackendKind { Stub => "stub", Api => "api" });
choice_enum!(FilterKind { Off => "off", Embedding => "embedding", External => "external" });

fn extractors_from_str<'de, D: Deserializer<'de>>(d: D) -> Result<Extractors, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Text(String),
        List(Vec<String>),
    }
    let text = match Repr::deserialize(d)? {
        Repr::Text(s) => s,
        Repr::List(v) => v.join(","),
    };
    text.parse().map_err(serde::de::Error::custom)
}

/// Pipeline settings. The file form is flat TOML plus optional
/// `[[relations]]` tables defining custom relations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(deserialize_with = "extractors_from_str")]
    pub extractors: Extractors,
    /// Bypasses extraction when set.
    pub heads: Option<Vec<String>>,
    pub matcher: MatcherKind,
    pub matcher_model: Option<PathBuf>,
    /// Embedding table for the model matcher and the embedding filter.
    pub embeddings: Option<PathBuf>,
    /// Restricts matching to these relation names.
    pub relation_subset: Option<Vec<String>>,
    #[serde(rename = "relations")]
    pub custom_relations: Vec<RelationSpec>,
    pub backend: BackendKind,
    pub api_url: Option<String>,
    pub api_model: Option<String>,
    /// Graph of worked examples for few-shot prompting.
    pub few_shot_samples: Option<PathBuf>,
    pub max_tokens: u32,
    pub temperature: f64,
    pub stop: Vec<String>,
    pub samples_per_tuple: u32,
    pub max_in_flight: usize,
    pub max_attempts: u32,
    pub filter: FilterKind,
    pub threshold: f64,
    pub filter_url: Option<String>,
    pub fail_closed: bool,
    pub dry_run: bool,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let decode = DecodeConfig::default();
        Self {
            extractors: Extractors::ALL,
            heads: None,
            matcher: MatcherKind::Heuristic,
            matcher_model: None,
            embeddings: None,
            relation_subset: None,
            custom_relations: Vec::new(),
            backend: BackendKind::Stub,
            api_url: None,
            api_model: None,
            few_shot_samples: None,
            max_tokens: decode.max_tokens,
            temperature: decode.temperature,
            stop: decode.stop,
            samples_per_tuple: decode.n,
            max_in_flight: 4,
            max_attempts: RetryPolicy::default().max_attempts,
            filter: FilterKind::Off,
            threshold: DEFAULT_THRESHOLD,
            filter_url: None,
            fail_closed: false,
            dry_run: false,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn decode(&self) -> DecodeConfig {
        DecodeConfig {
            max_tokens: self.max_tokens,
            temperature: self.temperature,
            stop: self.stop.clone(),
            n: self.samples_per_tuple,
        }
    }

    pub fn retry(&self) -> RetryPolicy {
        RetryPolicy {
            max_attempts: self.max_attempts,
            ..RetryPolicy::default()
        }
    }

    pub fn failure_policy(&self) -> FailurePolicy {
        if self.fail_closed {
            FailurePolicy::Closed
        } else {
            FailurePolicy::Open
        }
    }

    /// Built-in inventory plus the configured custom relations.
    pub fn registry(&self) -> Result<RelationRegistry, PipelineError> {
        let mut reg = RelationRegistry::builtin();
        for spec in &self.custom_relations {
            reg.register(KnowledgeRelation::from_spec(spec))?;
        }
        Ok(reg)
    }

    fn validate(&self) -> Result<(), PipelineError> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(FilterError::Threshold(self.threshold).into());
        }
        if self.heads.is_none() && self.extractors.is_empty() {
            return Err(ExtractionError::NoExtractors.into());
        }
        if self.matcher == MatcherKind::Model && self.matcher_model.is_none() {
            return Err(MatchError::NoModel.into());
        }
        if self.filter == FilterKind::External && self.filter_url.is_none() {
            return Err(PipelineError::Config("external filter needs filter_url".into()));
        }
        Ok(())
    }
}

/// Reads a graph file, choosing the format (and CSV separator) by extension.
pub fn read_graph(path: &Path) -> Result<KnowledgeGraph, PipelineError> {
    let format = GraphFormat::from_path(path)
        .ok_or_else(|| PipelineError::Config(format!("{}: unknown graph format", path.display())))?;
    let file = std::fs::File::open(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
    Ok(parse_graph(file, format, &ParseOptions::for_path(path))?)
}

/// Loads an embedding table, or falls back to the seeded hashing embedder.
pub fn load_embedder(path: Option<&Path>, seed: u64) -> Result<Arc<dyn TokenEmbedder>, PipelineError> {
    Ok(match path {
        Some(p) => Arc::new(Embeddings::from_path(p, None)?),
        None => Arc::new(HashingEmbedder::new(FALLBACK_EMBEDDING_DIM, seed)),
    })
}

/// Loads a saved matcher against the embedding table it was trained with.
pub fn load_matcher_model(model: &Path, embeddings: &Path) -> Result<MatcherModel, PipelineError> {
    let table = Arc::new(Embeddings::from_path(embeddings, None)?);
    let file = std::fs::File::open(model).map_err(|e| PipelineError::Config(format!("{}: {e}", model.display())))?;
    Ok(MatcherModel::load(std::io::BufReader::new(file), table)?)
}

/// The generation backend selected by `config`.
pub fn build_backend(
    config: &PipelineConfig,
    registry: Arc<RelationRegistry>,
) -> Result<Box<dyn KnowledgeModel>, PipelineError> {
    Ok(match config.backend {
        BackendKind::Stub => Box::new(StubModel),
        BackendKind::Api => {
            let mut api = ApiConfig::from_env();
            if let Some(url) = &config.api_url {
                api.base_url = url.clone();
            }
            api.model = config.api_model.clone();
            api.retry = config.retry();
            api.max_in_flight = config.max_in_flight;
            let mut model = ApiModel::new(api, registry);
            if let Some(p) = &config.few_shot_samples {
                model = model.with_samples(read_graph(p)?);
            }
            Box::new(model)
        }
    })
}

/// The relevance scorer for `kind`, or `None` when filtering is off.
pub fn build_scorer(
    config: &PipelineConfig,
    kind: FilterKind,
    registry: Arc<RelationRegistry>,
) -> Result<Option<Box<dyn RelevanceScorer>>, PipelineError> {
    Ok(match kind {
        FilterKind::Off => None,
        FilterKind::Embedding => Some(Box::new(EmbeddingCosineScorer::new(
            load_embedder(config.embeddings.as_deref(), config.seed)?,
            registry,
        ))),
        FilterKind::External => {
            let url = config
                .filter_url
                .clone()
                .ok_or_else(|| PipelineError::Config("external filter needs filter_url".into()))?;
            Some(Box::new(ExternalScorer::new(url, config.retry(), config.max_in_flight)))
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferOutput {
    pub graph: KnowledgeGraph,
    pub diagnostics: Vec<Diagnostic>,
    /// Present when a filter ran.
    pub judgments: Option<Vec<RelevanceJudgment>>,
}

/// A configured pipeline with its registry, matcher, backend and scorer
/// resolved. The backend is never built for dry runs.
pub struct Pipeline {
    config: PipelineConfig,
    registry: Arc<RelationRegistry>,
    matcher_model: Option<MatcherModel>,
    backend: Option<Box<dyn KnowledgeModel>>,
    scorer: Option<Box<dyn RelevanceScorer>>,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        let registry = Arc::new(config.registry()?);

        let matcher_model = match (config.matcher, &config.matcher_model) {
            (MatcherKind::Model, Some(path)) => {
                let emb = config
                    .embeddings
                    .as_deref()
                    .ok_or_else(|| PipelineError::Config("model matcher needs an embeddings file".into()))?;
                Some(load_matcher_model(path, emb)?)
            }
            _ => None,
        };

        let backend = if config.dry_run {
            None
        } else {
            Some(build_backend(&config, registry.clone())?)
        };
        let scorer = if config.dry_run {
            None
        } else {
            build_scorer(&config, config.filter, registry.clone())?
        };

        Ok(Self {
            config,
            registry,
            matcher_model,
            backend,
            scorer,
        })
    }

    /// Replaces the generation backend.
    pub fn with_backend(mut self, backend: Box<dyn KnowledgeModel>) -> Self {
        if !self.config.dry_run {
            self.backend = Some(backend);
        }
        self
    }

    /// Replaces the relevance scorer; it runs whenever the run is not dry.
    pub fn with_scorer(mut self, scorer: Box<dyn RelevanceScorer>) -> Self {
        if !self.config.dry_run {
            self.scorer = Some(scorer);
        }
        self
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn registry(&self) -> &Arc<RelationRegistry> {
        &self.registry
    }

    fn heads(&self, text: &str) -> Result<Vec<KnowledgeHead>, PipelineError> {
        if let Some(explicit) = &self.config.heads {
            return Ok(explicit.iter().map(KnowledgeHead::new).collect::<Result<_, _>>()?);
        }
        if text.trim().is_empty() {
            return Err(PipelineError::Config("input text is empty and no heads were given".into()));
        }
        Ok(extract_heads(text, self.config.extractors)?
            .into_iter()
            .map(|h| h.head)
            .collect())
    }

    pub fn infer(&self, text: &str) -> Result<InferOutput, PipelineError> {
        let heads = self.heads(text)?;
        let matcher = match (self.config.matcher, &self.matcher_model) {
            (MatcherKind::Base, _) => Matcher::Base,
            (MatcherKind::Heuristic, _) => Matcher::Heuristic,
            (MatcherKind::Model, Some(m)) => Matcher::Model(m),
            (MatcherKind::Model, None) => return Err(MatchError::NoModel.into()),
        };
        let pairs = match_relations(&heads, &matcher, &self.registry, self.config.relation_subset.as_deref())?;
        let partial: KnowledgeGraph = pairs
            .into_iter()
            .map(|(head, relation)| KnowledgeTuple::new(head, relation, Vec::new()))
            .collect::<Result<_, _>>()?;

        let Some(backend) = &self.backend else {
            return Ok(InferOutput {
                graph: partial,
                diagnostics: Vec::new(),
                judgments: None,
            });
        };
        let generation = backend.generate(&partial, &self.config.decode())?;
        let Some(scorer) = &self.scorer else {
            return Ok(InferOutput {
                graph: generation.graph,
                diagnostics: generation.diagnostics,
                judgments: None,
            });
        };
        let policy = self.config.failure_policy();
        let context = if text.trim().is_empty() {
            // explicit heads without text: judge against the heads themselves
            self.config.heads.as_deref().unwrap_or_default().join(". ")
        } else {
            text.to_string()
        };
        let out = filter_graph(&generation.graph, &context, self.config.threshold, scorer.as_ref(), policy)?;
        Ok(InferOutput {
            graph: out.kept,
            diagnostics: generation.diagnostics,
            judgments: Some(out.judgments),
        })
    }
}

/// Runs the pipeline once with `config`.
pub fn infer(text: &str, config: &PipelineConfig) -> Result<KnowledgeGraph, PipelineError> {
    Ok(Pipeline::new(config.clone())?.infer(text)?.graph)
}

//! Remote text-completion backend.

use std::collections::HashSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{DecodeConfig, Diagnostic, Generation, KnowledgeModel, ModelError};
use crate::http::{self, HttpFailure, RetryPolicy};
use crate::knowledge::{KnowledgeGraph, KnowledgeTuple};
use crate::pool;
use crate::relations::{build_few_shot_prompt, verbalize, RelationRegistry};

pub const API_KEY_ENV: &str = "KOGITO_API_KEY";
pub const API_URL_ENV: &str = "KOGITO_API_URL";
const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub max_tokens: u32,
    pub temperature: f64,
    pub stop: Vec<String>,
    pub n: u32,
}

impl CompletionRequest {
    pub fn new(prompt: impl Into<String>, decode: &DecodeConfig) -> Self {
        Self {
            prompt: prompt.into(),
            max_tokens: decode.max_tokens,
            temperature: decode.temperature,
            stop: decode.stop.clone(),
            n: decode.n,
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        if self.prompt.trim().is_empty() {
            return Err(ModelError::InvalidRequest("prompt is empty".into()));
        }
        if self.max_tokens == 0 {
            return Err(ModelError::InvalidRequest("max_tokens must be at least 1".into()));
        }
        if self.n == 0 {
            return Err(ModelError::InvalidRequest("n must be at least 1".into()));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(ModelError::InvalidRequest("temperature must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiConfig {
    /// Base URL; requests go to `{base_url}/completions`.
    pub base_url: String,
    pub api_key: Option<String>,
    pub model: Option<String>,
    pub retry: RetryPolicy,
    pub max_in_flight: usize,
}

impl Default for ApiConfig {
    fn default() -> Self {
        Self {
            base_url: DEFAULT_BASE_URL.to_string(),
            api_key: None,
            model: None,
            retry: RetryPolicy::default(),
            max_in_flight: 4,
        }
    }
}

impl ApiConfig {
    /// Defaults overridden by `KOGITO_API_KEY` and `KOGITO_API_URL`.
    pub fn from_env() -> Self {
        let mut c = Self::default();
        if let Ok(key) = std::env::var(API_KEY_ENV) {
            if !key.trim().is_empty() {
                c.api_key = Some(key);
            }
        }
        if let Ok(url) = std::env::var(API_URL_ENV) {
            if !url.trim().is_empty() {
                c.base_url = url;
            }
        }
        c
    }

    fn endpoint(&self) -> String {
        format!("{}/completions", self.base_url.trim_end_matches('/'))
    }

    fn key(&self) -> Result<&str, ModelError> {
        self.api_key
            .as_deref()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| ModelError::Credential(format!("no API key; set {API_KEY_ENV}")))
    }
}

#[derive(Deserialize)]
struct Choice {
    text: String,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

fn truncate_at_stop<'a>(text: &'a str, stop: &[String]) -> &'a str {
    let cut = stop
        .iter()
        .filter(|s| !s.is_empty())
        .filter_map(|s| text.find(s.as_str()))
        .min()
        .unwrap_or(text.len());
    &text[..cut]
}

fn to_model_error(f: HttpFailure) -> ModelError {
    match f {
        HttpFailure::Transport(message) => ModelError::Transport {
            message,
            partial: KnowledgeGraph::new(),
        },
        HttpFailure::Status { status: 401 | 403, body } => ModelError::Credential(body),
        HttpFailure::Status { status, body } => ModelError::Api { status, body },
    }
}

fn complete_with(agent: &ureq::Agent, config: &ApiConfig, req: &CompletionRequest) -> Result<Vec<String>, ModelError> {
    let key = config.key()?;
    req.validate()?;
    let mut body = serde_json::to_value(req).map_err(|e| ModelError::InvalidRequest(e.to_string()))?;
    if let Some(model) = &config.model {
        body["model"] = serde_json::Value::String(model.clone());
    }
    let text = http::post_json(agent, &config.endpoint(), Some(key), &body, &config.retry).map_err(to_model_error)?;
    let resp: CompletionResponse =
        serde_json::from_str(&text).map_err(|e| ModelError::Response(format!("{e}: {}", http::excerpt(&text))))?;
    Ok(resp
        .choices
        .iter()
        .map(|c| truncate_at_stop(&c.text, &req.stop).to_string())
        .collect())
}

/// Sends one completion request. Each returned string is cut at the first
/// stop sequence. A missing key fails before any network traffic.
pub fn complete_via_api(config: &ApiConfig, req: &CompletionRequest) -> Result<Vec<String>, ModelError> {
    config.key()?;
    complete_with(&http::agent(&config.retry), config, req)
}

/// Completion-API knowledge model. Zero-shot prompts come from the relation
/// verbalizer; when a sample graph holds tuples for the relation, a few-shot
/// prompt is built from them instead.
pub struct ApiModel {
    config: ApiConfig,
    registry: Arc<RelationRegistry>,
    samples: Option<KnowledgeGraph>,
    agent: ureq::Agent,
}

impl ApiModel {
    pub fn new(config: ApiConfig, registry: Arc<RelationRegistry>) -> Self {
        let agent = http::agent(&config.retry);
        Self {
            config,
            registry,
            samples: None,
            agent,
        }
    }

    pub fn with_samples(mut self, samples: KnowledgeGraph) -> Self {
        self.samples = Some(samples);
        self
    }

    pub fn prompt_for(&self, tuple: &KnowledgeTuple) -> Result<String, ModelError> {
        let rel = self.registry.resolve(&tuple.relation);
        if let (Some(samples), Some(rel)) = (&self.samples, rel) {
            let own: KnowledgeGraph = samples
                .iter()
                .filter(|s| self.registry.resolve(&s.relation).is_some_and(|r| r.name == rel.name))
                .map(|s| KnowledgeTuple {
                    relation: rel.name.clone(),
                    ..s.clone()
                })
                .collect();
            if !own.is_empty() {
                return build_few_shot_prompt(rel, &own, &tuple.head).map_err(|e| ModelError::InvalidRequest(e.to_string()));
            }
        }
        let line = verbalize(&self.registry, &tuple.relation, tuple.head.text(), None, None);
        Ok(match rel.and_then(|r| r.instruction.as_deref()) {
            Some(instruction) => format!("{instruction}\n{line}"),
            None => line,
        })
    }

    fn tails_for(&self, tuple: &KnowledgeTuple, decode: &DecodeConfig) -> Result<Vec<String>, ModelError> {
        let req = CompletionRequest::new(self.prompt_for(tuple)?, decode);
        let mut seen = HashSet::new();
        Ok(complete_with(&self.agent, &self.config, &req)?
            .into_iter()
            .map(|t| t.trim().to_string())
            .filter(|t| !t.is_empty() && seen.insert(t.clone()))
            .collect())
    }
}

impl KnowledgeModel for ApiModel {
    fn name(&self) -> &str {
        "api"
    }

    fn generate(&self, partial: &KnowledgeGraph, decode: &DecodeConfig) -> Result<Generation, ModelError> {
        self.config.key()?;
        let tuples = partial.tuples();
        let results = pool::ordered_map(tuples, self.config.max_in_flight, |_, t| self.tails_for(t, decode));

        let mut graph = KnowledgeGraph::new();
        let mut diagnostics = Vec::new();
        let mut transport_failures = 0usize;
        let mut last_transport = String::new();
        for (i, (t, r)) in tuples
            .iter()
            .zip(results)
            .enumerate()
        {
            let tails = match r {
                Ok(tails) => tails,
                Err(ModelError::Credential(m)) => return Err(ModelError::Credential(m)),
                Err(e) => {
                    if let ModelError::Transport { message, .. } = &e {
                        transport_failures += 1;
                        last_transport = message.clone();
                    }
                    diagnostics.push(Diagnostic {
                        index: i,
                        head: t.head.text().to_string(),
                        relation: t.relation.clone(),
                        message: e.to_string(),
                    });
                    Vec::new()
                }
            };
            graph.push(KnowledgeTuple { tails, ..t.clone() });
        }
        if !tuples.is_empty() && transport_failures == tuples.len() {
            return Err(ModelError::Transport {
                message: last_transport,
                partial: graph,
            });
        }
        Ok(Generation { graph, diagnostics })
    }
}

#[cfg(test)]
mod tests {
    use std::time::Duration;

    use super::*;
    use crate::http::mock::{dead_url, MockServer};
    use crate::relations::{KnowledgeRelation, RelationGroup};

    fn cfg(url: &str) -> ApiConfig {
        ApiConfig {
            base_url: url.to_string(),
            api_key: Some("secret".into()),
            model: None,
            retry: RetryPolicy {
                max_attempts: 3,
                backoff_base: Duration::from_millis(1),
                timeout: Duration::from_secs(5),
            },
            max_in_flight: 4,
        }
    }

    fn reply(texts: &[&str]) -> String {
        let choices: Vec<_> = texts.iter().map(|t| serde_json::json!({ "text": t })).collect();
        serde_json::json!({ "choices": choices }).to_string()
    }

    fn pairs(rows: &[(&str, &str)]) -> KnowledgeGraph {
        rows.iter()
            .map(|(h, r)| KnowledgeTuple::from_parts(h, r, Vec::<String>::new()).unwrap())
            .collect()
    }

    #[test]
    fn stop_sequence_truncation() {
        let stop = vec!["\n".to_string()];
        assert_eq!(truncate_at_stop("a\nb", &stop), "a");
        assert_eq!(truncate_at_stop("ab", &stop), "ab");
        let two = vec![".".to_string(), "\n".to_string()];
        assert_eq!(truncate_at_stop("x\ny.z", &two), "x");
    }

    #[test]
    fn missing_key_makes_no_request() {
        let srv = MockServer::start(|_, _| (200, reply(&["x"])));
        let mut c = cfg(&srv.url);
        c.api_key = None;
        let req = CompletionRequest::new("p", &DecodeConfig::default());
        assert!(matches!(complete_via_api(&c, &req), Err(ModelError::Credential(_))));
        let model = ApiModel::new(c, Arc::new(RelationRegistry::builtin()));
        let err = model.generate(&pairs(&[("h", "xNeed")]), &DecodeConfig::default());
        assert!(matches!(err, Err(ModelError::Credential(_))));
        assert_eq!(srv.hits(), 0);
    }

    #[test]
    fn wire_format_and_truncation() {
        let srv = MockServer::start(|_, _| (200, reply(&["to practice hard\nextra"])));
        let req = CompletionRequest::new("PersonX plays piano", &DecodeConfig::default());
        let out = complete_via_api(&cfg(&srv.url), &req).unwrap();
        assert_eq!(out, ["to practice hard"]);
        let seen = srv.seen.lock().unwrap();
        assert_eq!(seen[0].path, "/completions");
        assert_eq!(seen[0].header("Authorization"), Some("Bearer secret"));
        assert_eq!(
            seen[0].body,
            serde_json::json!({"prompt": "PersonX plays piano", "max_tokens": 24, "temperature": 0.0, "stop": ["\n"], "n": 1})
        );
    }

    #[test]
    fn echo_server() {
        let srv = MockServer::start(|_, r| {
            let p = r.body["prompt"].as_str().unwrap().to_string();
            (200, reply(&[&p[p.len() - 5..]]))
        });
        let req = CompletionRequest::new("hello world", &DecodeConfig::default());
        assert_eq!(complete_via_api(&cfg(&srv.url), &req).unwrap(), ["world"]);
    }

    #[test]
    fn status_errors() {
        let srv = MockServer::start(|_, _| (401, "denied".into()));
        let req = CompletionRequest::new("p", &DecodeConfig::default());
        assert!(matches!(complete_via_api(&cfg(&srv.url), &req), Err(ModelError::Credential(_))));
        let srv = MockServer::start(|_, _| (404, "no such route".into()));
        match complete_via_api(&cfg(&srv.url), &req) {
            Err(ModelError::Api { status, body }) => assert_eq!((status, body.as_str()), (404, "no such route")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_requests_are_rejected_locally() {
        let srv = MockServer::start(|_, _| (200, reply(&["x"])));
        let d = DecodeConfig {
            max_tokens: 0,
            ..DecodeConfig::default()
        };
        let req = CompletionRequest::new("p", &d);
        assert!(matches!(complete_via_api(&cfg(&srv.url), &req), Err(ModelError::InvalidRequest(_))));
        assert_eq!(srv.hits(), 0);
    }

    #[test]
    fn generate_keeps_order_and_dedups_tails() {
        let srv = MockServer::start(|_, r| {
            let p = r.body["prompt"].as_str().unwrap();
            let word = p.split_whitespace().next().unwrap().to_string();
            (200, reply(&[&format!(" {word}"), &format!("{word}\n"), "other"]))
        });
        let heads: Vec<String> = (0..10).map(|i| format!("h{i}")).collect();
        let rows: Vec<(&str, &str)> = heads.iter().map(|h| (h.as_str(), "AtLocation")).collect();
        let model = ApiModel::new(cfg(&srv.url), Arc::new(RelationRegistry::builtin()));
        let d = DecodeConfig { n: 3, ..DecodeConfig::default() };
        let out = model.generate(&pairs(&rows), &d).unwrap();
        assert!(out.diagnostics.is_empty());
        for (i, t) in out.graph.iter().enumerate() {
            assert_eq!(t.head.text(), format!("h{i}"));
            assert_eq!(t.tails, [format!("h{i}"), "other".to_string()]);
        }
    }

    #[test]
    fn per_tuple_failure_is_flagged() {
        let srv = MockServer::start(|_, r| {
            if r.body["prompt"].as_str().unwrap().starts_with("bad") {
                (400, "nope".into())
            } else {
                (200, reply(&["fine"]))
            }
        });
        let model = ApiModel::new(cfg(&srv.url), Arc::new(RelationRegistry::builtin()));
        let out = model
            .generate(&pairs(&[("good", "AtLocation"), ("bad", "AtLocation")]), &DecodeConfig::default())
            .unwrap();
        assert_eq!(out.graph.tuples()[0].tails, ["fine"]);
        assert!(out.graph.tuples()[1].tails.is_empty());
        assert_eq!(out.diagnostics.len(), 1);
        assert_eq!(out.diagnostics[0].index, 1);
    }

    #[test]
    fn unreachable_backend_returns_partial_graph() {
        let model = ApiModel::new(cfg(&dead_url()), Arc::new(RelationRegistry::builtin()));
        match model.generate(&pairs(&[("a", "xNeed"), ("b", "xNeed")]), &DecodeConfig::default()) {
            Err(ModelError::Transport { partial, .. }) => {
                assert_eq!(partial.len(), 2);
                assert!(partial.iter().all(|t| t.tails.is_empty()));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_and_few_shot_prompts() {
        let reg = RelationRegistry::builtin()
            .with(
                KnowledgeRelation::new("xWishes", RelationGroup::Custom)
                    .with_template("Situation {index}: {head}. As a result, {subject} wishes")
                    .with_instruction("How does the situation affect the character's wishes?"),
            )
            .unwrap();
        let model = ApiModel::new(cfg("http://unused"), Arc::new(reg));
        let t = KnowledgeTuple::from_parts("PersonX plays piano", "xNeed", Vec::<String>::new()).unwrap();
        assert_eq!(model.prompt_for(&t).unwrap(), "PersonX plays piano. Before that, PersonX needs");

        let samples: KnowledgeGraph = [KnowledgeTuple::from_parts("John is at a party", "xWishes", ["to dance"]).unwrap()]
            .into_iter()
            .collect();
        let model = model.with_samples(samples);
        let q = KnowledgeTuple::from_parts("Isaac makes a huge mistake", "xWishes", Vec::<String>::new()).unwrap();
        assert_eq!(
            model.prompt_for(&q).unwrap(),
            "How does the situation affect the character's wishes?\n\
             Situation 1: John is at a party. As a result, John wishes to dance\n\
             Situation 2: Isaac makes a huge mistake. As a result, Isaac wishes"
        );
        // no samples for xNeed: zero-shot
        assert_eq!(model.prompt_for(&t).unwrap(), "PersonX plays piano. Before that, PersonX needs");
    }
}

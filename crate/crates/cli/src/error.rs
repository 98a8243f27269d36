use std::fmt;

use kgen_core::filter::FilterError;
use kgen_core::knowledge::KnowledgeError;
use kgen_core::matching::MatchError;
use kgen_core::metrics::MetricError;
use kgen_core::models::ModelError;
use kgen_core::PipelineError;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_REMOTE: u8 = 3;
pub const EXIT_INFEASIBLE: u8 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            kind: "usage",
            message: message.into(),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "error": {
                "kind": self.kind,
                "message": self.message,
                "exit_code": self.code,
            }
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message)
    }
}

fn model_class(e: &ModelError) -> (u8, &'static str) {
    match e {
        ModelError::Credential(_) => (EXIT_REMOTE, "credential"),
        ModelError::Transport { .. } | ModelError::Api { .. } | ModelError::Response(_) => (EXIT_REMOTE, "transport"),
        ModelError::InvalidRequest(_) => (EXIT_USAGE, "validation"),
    }
}

fn filter_class(e: &FilterError) -> (u8, &'static str) {
    match e {
        FilterError::Transport(_) | FilterError::Status { .. } | FilterError::Response(_) => (EXIT_REMOTE, "transport"),
        _ => (EXIT_USAGE, "validation"),
    }
}

fn match_class(e: &MatchError) -> (u8, &'static str) {
    match e {
        MatchError::Infeasible(_) => (EXIT_INFEASIBLE, "infeasible"),
        MatchError::Io(_) => (EXIT_USAGE, "io"),
        _ => (EXIT_USAGE, "validation"),
    }
}

fn build(class: (u8, &'static str), message: String) -> CliError {
    CliError {
        code: class.0,
        kind: class.1,
        message,
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        let class = match &e {
            PipelineError::Generation(m) => model_class(m),
            PipelineError::Filter(f) => filter_class(f),
            PipelineError::Matching(m) => match_class(m),
            PipelineError::Config(_) => (EXIT_USAGE, "config"),
            _ => (EXIT_USAGE, "validation"),
        };
        build(class, e.to_string())
    }
}

impl From<MatchError> for CliError {
    fn from(e: MatchError) -> Self {
        build(match_class(&e), e.to_string())
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        let class = match &e {
            MetricError::Model(m) => model_class(m),
            _ => (EXIT_USAGE, "validation"),
        };
        build(class, e.to_string())
    }
}

impl From<FilterError> for CliError {
    fn from(e: FilterError) -> Self {
        build(filter_class(&e), e.to_string())
    }
}

impl From<KnowledgeError> for CliError {
    fn from(e: KnowledgeError) -> Self {
        build((EXIT_USAGE, "input"), e.to_string())
    }
}

impl From<kgen_core::extraction::ExtractionError> for CliError {
    fn from(e: kgen_core::extraction::ExtractionError) -> Self {
        build((EXIT_USAGE, "validation"), e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        build((EXIT_USAGE, "io"), e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        build((EXIT_USAGE, "input"), e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_class() {
        let e: CliError = PipelineError::Generation(ModelError::Credential("no key".into())).into();
        assert_eq!((e.code, e.kind), (EXIT_REMOTE, "credential"));
        let e: CliError = MatchError::Infeasible("empty".into()).into();
        assert_eq!(e.code, EXIT_INFEASIBLE);
        let e: CliError = PipelineError::Config("bad".into()).into();
        assert_eq!(e.code, EXIT_USAGE);
        let e: CliError = FilterError::Transport("refused".into()).into();
        assert_eq!(e.code, EXIT_REMOTE);
    }

    #[test]
    fn json_form_carries_kind_and_code() {
        let v = CliError::usage("missing --graph").to_json();
        assert_eq!(v["error"]["kind"], "usage");
        assert_eq!(v["error"]["exit_code"], 2);
        assert_eq!(v["error"]["message"], "missing --graph");
    }
}

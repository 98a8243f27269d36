mod args;
mod error;

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;

use clap::Parser;
use kgen_core::matching::{
    compute_overlap, evaluate_matcher, group_counts, resplit_dataset, train_swem_matcher, Embeddings, ResplitConfig,
    TrainConfig,
};
use kgen_core::pipeline::{build_backend, build_scorer, read_graph, BackendKind, FilterKind, MatcherKind};
use kgen_core::{
    evaluate_model, extract_heads, filter_graph, serialize_graph, GraphFormat, KnowledgeGraph, Matcher, MatcherDataset,
    Metric, MetricParams, ParseOptions, Pipeline, PipelineConfig,
};
use serde_json::json;

use args::{BackendArg, Cli, Command, FilterArg, MatcherArg, MatcherOptions, TextInput};
use error::CliError;

type Result<T> = std::result::Result<T, CliError>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let json_errors = cli.json_errors;
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if json_errors {
                eprintln!("{}", e.to_json());
            } else {
                eprintln!("error: {e}");
            }
            ExitCode::from(e.code)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(p) => PipelineConfig::from_path(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    config.dry_run |= cli.dry_run;
    let output = cli.output.as_deref();
    match cli.command {
        Command::Infer(a) => infer(config, a, output),
        Command::Heads(a) => heads(config, a, output),
        Command::Match(a) => match_cmd(config, a, output),
        Command::TrainMatcher(a) => train(config, a, output),
        Command::Resplit(a) => resplit(config, a, output),
        Command::Eval(a) => eval(config, a, output),
        Command::Filter(a) => filter(config, a, output),
    }
}

// ---- I/O helpers ----

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_graph(graph: &KnowledgeGraph, path: Option<&Path>) -> Result<()> {
    let (format, opts) = match path {
        Some(p) => (
            GraphFormat::from_path(p).unwrap_or(GraphFormat::Jsonl),
            ParseOptions::for_path(p),
        ),
        None => (GraphFormat::Jsonl, ParseOptions::default()),
    };
    let mut out = sink(path)?;
    serialize_graph(graph, format, &opts, &mut out)?;
    out.flush()?;
    Ok(())
}

fn write_json(value: &impl serde::Serialize, path: Option<&Path>) -> Result<()> {
    let mut out = sink(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

fn write_jsonl<T: serde::Serialize>(items: &[T], path: &Path) -> Result<()> {
    let mut out = create(path)?;
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn read_text(input: &TextInput) -> Result<Option<String>> {
    if let Some(t) = &input.text {
        return Ok(Some(t.clone()));
    }
    let Some(path) = &input.input_file else {
        return Ok(None);
    };
    let mut text = String::new();
    if path.as_os_str() == "-" {
        io::stdin().read_to_string(&mut text)?;
    } else {
        open(path)?.read_to_string(&mut text)?;
    }
    Ok(Some(text))
}

fn apply_matcher_options(config: &mut PipelineConfig, m: MatcherOptions) {
    if let Some(kind) = m.matcher {
        config.matcher = match kind {
            MatcherArg::Base => MatcherKind::Base,
            MatcherArg::Heuristic => MatcherKind::Heuristic,
            MatcherArg::Model => MatcherKind::Model,
        };
    }
    if m.model.is_some() {
        config.matcher_model = m.model;
    }
    if m.embeddings.is_some() {
        config.embeddings = m.embeddings;
    }
    if m.relations.is_some() {
        config.relation_subset = m.relations;
    }
}

fn backend_kind(b: BackendArg) -> BackendKind {
    match b {
        BackendArg::Stub => BackendKind::Stub,
        BackendArg::Api => BackendKind::Api,
    }
}

fn filter_kind(f: FilterArg) -> FilterKind {
    match f {
        FilterArg::Off => FilterKind::Off,
        FilterArg::Embedding => FilterKind::Embedding,
        FilterArg::External => FilterKind::External,
    }
}

// ---- commands ----

fn infer(mut config: PipelineConfig, a: args::InferArgs, output: Option<&Path>) -> Result<()> {
    if !a.heads.is_empty() {
        config.heads = Some(a.heads);
    }
    if let Some(e) = &a.extractors {
        config.extractors = e.parse()?;
    }
    apply_matcher_options(&mut config, a.matching);
    if let Some(b) = a.backend {
        config.backend = backend_kind(b);
    }
    if a.api_url.is_some() {
        config.api_url = a.api_url;
    }
    if a.api_model.is_some() {
        config.api_model = a.api_model;
    }
    if a.few_shot.is_some() {
        config.few_shot_samples = a.few_shot;
    }
    if let Some(m) = a.max_tokens {
        config.max_tokens = m;
    }
    if let Some(t) = a.temperature {
        config.temperature = t;
    }
    if !a.stop.is_empty() {
        config.stop = a.stop;
    }
    if let Some(f) = a.filter {
        config.filter = filter_kind(f);
    }
    if let Some(t) = a.threshold {
        config.threshold = t;
    }
    if a.filter_url.is_some() {
        config.filter_url = a.filter_url;
    }
    config.fail_closed |= a.fail_closed;

    let text = read_text(&a.input)?;
    if text.is_none() && config.heads.is_none() {
        return Err(CliError::usage("infer needs --text, --input-file or --head"));
    }
    let pipeline = Pipeline::new(config)?;
    let out = pipeline.infer(text.as_deref().unwrap_or(""))?;
    for d in &out.diagnostics {
        log::warn!("tuple {} ({}, {}): {}", d.index, d.head, d.relation, d.message);
    }
    if let (Some(path), Some(j)) = (&a.judgments, &out.judgments) {
        write_jsonl(j, path)?;
    }
    write_graph(&out.graph, output)
}

fn heads(config: PipelineConfig, a: args::HeadsArgs, output: Option<&Path>) -> Result<()> {
    let extractors = match &a.extractors {
        Some(e) => e.parse()?,
        None => config.extractors,
    };
    let text = read_text(&a.input)?.ok_or_else(|| CliError::usage("heads needs --text or --input-file"))?;
    write_json(&extract_heads(&text, extractors)?, output)
}

fn read_heads_file(path: &Path) -> Result<Vec<String>> {
    let value: serde_json::Value = serde_json::from_reader(open(path)?)?;
    let items = value
        .as_array()
        .ok_or_else(|| CliError::usage(format!("{}: expected a JSON list", path.display())))?;
    items
        .iter()
        .map(|item| {
            item.as_str()
                .or_else(|| item.get("head").and_then(|h| h.as_str()))
                .map(String::from)
                .ok_or_else(|| CliError::usage(format!("{}: entries must be strings or {{\"head\": ...}}", path.display())))
        })
        .collect()
}

fn match_cmd(mut config: PipelineConfig, a: args::MatchArgs, output: Option<&Path>) -> Result<()> {
    let mut texts = a.heads;
    if let Some(p) = &a.heads_file {
        texts.extend(read_heads_file(p)?);
    }
    if texts.is_empty() {
        return Err(CliError::usage("match needs --heads-file or --head"));
    }
    apply_matcher_options(&mut config, a.matching);
    config.heads = Some(texts);
    config.dry_run = true;
    // a dry run is exactly extraction-free matching
    let pipeline = Pipeline::new(config)?;
    write_graph(&pipeline.infer("")?.graph, output)
}

fn train(config: PipelineConfig, a: args::TrainArgs, output: Option<&Path>) -> Result<()> {
    let table = Arc::new(Embeddings::from_path(&a.embeddings, None)?);
    let train = MatcherDataset::read_jsonl(open(&a.train)?)?;
    let cfg = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        learning_rate: a.lr,
        seed: config.seed,
        dim: table.dim(),
        ..TrainConfig::default()
    };
    let (model, report) = train_swem_matcher(&train, table, &cfg)?;
    let mut out = create(&a.out)?;
    model.save(&mut out)?;
    out.flush()?;
    let test_scores = match &a.test {
        Some(p) => Some(evaluate_matcher(&Matcher::Model(&model), &MatcherDataset::read_jsonl(open(p)?)?)),
        None => None,
    };
    write_json(
        &json!({
            "examples": train.len(),
            "epoch_losses": report.epoch_losses,
            "test": test_scores,
        }),
        output,
    )
}

fn resplit(config: PipelineConfig, a: args::ResplitArgs, output: Option<&Path>) -> Result<()> {
    let pool = match &a.input {
        Some(p) => MatcherDataset::read_jsonl(open(p)?)?,
        None => {
            let registry = config.registry()?;
            let mut graph = KnowledgeGraph::new();
            for p in &a.graph {
                for t in read_graph(p)? {
                    graph.push(t);
                }
            }
            MatcherDataset::from_graph(&graph, &registry)
        }
    };
    let cfg = ResplitConfig {
        n: a.n,
        seed: config.seed,
        test_fraction: a.test_fraction,
        strict_balance: !a.relaxed_balance,
        ..ResplitConfig::default()
    };
    let (train, test) = resplit_dataset(&pool, &cfg)?;
    let mut out = create(&a.out_train)?;
    train.write_jsonl(&mut out)?;
    out.flush()?;
    let mut out = create(&a.out_test)?;
    test.write_jsonl(&mut out)?;
    out.flush()?;
    if a.report {
        let overlap = compute_overlap(&train, &test)?;
        let [physical, social, event] = group_counts(&test);
        write_json(
            &json!({
                "n": a.n,
                "overlap": overlap,
                "test_groups": { "physical": physical, "social": social, "event": event },
            }),
            output,
        )?;
    }
    Ok(())
}

fn eval(mut config: PipelineConfig, a: args::EvalArgs, output: Option<&Path>) -> Result<()> {
    config.backend = backend_kind(a.backend);
    if a.api_url.is_some() {
        config.api_url = a.api_url;
    }
    let metrics = Metric::parse_list(&a.metrics)?;
    let refs = read_graph(&a.graph)?;
    let backend = build_backend(&config, Arc::new(config.registry()?))?;
    let report = evaluate_model(backend.as_ref(), &refs, &metrics, &config.decode(), &MetricParams::default())?;
    write_json(&report, a.out.as_deref().or(output))
}

fn filter(mut config: PipelineConfig, a: args::FilterArgs, output: Option<&Path>) -> Result<()> {
    if let Some(t) = a.threshold {
        config.threshold = t;
    }
    if a.embeddings.is_some() {
        config.embeddings = a.embeddings;
    }
    if a.filter_url.is_some() {
        config.filter_url = a.filter_url;
    }
    config.fail_closed |= a.fail_closed;
    let kind = match a.scorer.map(filter_kind).unwrap_or(config.filter) {
        FilterKind::Off => FilterKind::Embedding,
        k => k,
    };
    let registry = Arc::new(config.registry()?);
    let scorer = build_scorer(&config, kind, registry)?.expect("filter kind is never off here");
    let graph = read_graph(&a.graph)?;
    let result = filter_graph(&graph, &a.context, config.threshold, scorer.as_ref(), config.failure_policy())?;
    if let Some(path) = &a.judgments {
        write_jsonl(&result.judgments, path)?;
    }
    let failures = result.judgments.iter().filter(|j| j.score.is_none()).count();
    if failures > 0 {
        log::warn!("{failures} tuples could not be scored");
    }
    write_graph(&result.kept, a.out.as_deref().or(output))
}

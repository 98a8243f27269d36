use std::io::{BufRead, BufReader, Read, Write};
use std::str::FromStr;

use serde_json::Value;

use super::{KnowledgeError, KnowledgeGraph, KnowledgeHead, KnowledgeTuple};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphFormat {
    Csv,
    Jsonl,
}

impl GraphFormat {
    /// Guesses the format from a file extension (`.csv`, `.jsonl`, `.json`).
    pub fn from_path(path: &std::path::Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" | "psv" | "tsv" => Some(Self::Csv),
            "jsonl" | "json" | "ndjson" => Some(Self::Jsonl),
            _ => None,
        }
    }
}

impl FromStr for GraphFormat {
    type Err = KnowledgeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "jsonl" => Ok(Self::Jsonl),
            other => Err(KnowledgeError::UnknownFormat(other.to_string())),
        }
    }
}

/// Delimited-text layout. Every column after the relation column is a tail.
#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub separator: u8,
    pub header: bool,
    pub head_column: usize,
    pub relation_column: usize,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            separator: b',',
            header: false,
            head_column: 0,
            relation_column: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct JsonlOptions {
    pub head_key: String,
    pub relation_key: String,
    pub tails_key: String,
}

impl Default for JsonlOptions {
    fn default() -> Self {
        Self {
            head_key: "head".into(),
            relation_key: "relation".into(),
            tails_key: "tails".into(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    pub csv: CsvOptions,
    pub jsonl: JsonlOptions,
}

impl ParseOptions {
    /// Defaults, with the CSV separator chosen by extension (`.tsv` tab,
    /// `.psv` pipe).
    pub fn for_path(path: &std::path::Path) -> Self {
        let mut o = Self::default();
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("tsv") => o.csv.separator = b'\t',
            Some("psv") => o.csv.separator = b'|',
            _ => {}
        }
        o
    }
}

pub fn parse_graph<R: Read>(
    source: R,
    format: GraphFormat,
    options: &ParseOptions,
) -> Result<KnowledgeGraph, KnowledgeError> {
    match format {
        GraphFormat::Csv => parse_csv(source, &options.csv),
        GraphFormat::Jsonl => parse_jsonl(source, &options.jsonl),
    }
}

pub fn serialize_graph<W: Write>(
    graph: &KnowledgeGraph,
    format: GraphFormat,
    options: &ParseOptions,
    sink: W,
) -> Result<(), KnowledgeError> {
    match format {
        GraphFormat::Csv => write_csv(graph, &options.csv, sink),
        GraphFormat::Jsonl => write_jsonl(graph, &options.jsonl, sink),
    }
}

fn parse_error(line: usize, message: impl Into<String>) -> KnowledgeError {
    KnowledgeError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_jsonl<R: Read>(source: R, opts: &JsonlOptions) -> Result<KnowledgeGraph, KnowledgeError> {
    let mut graph = KnowledgeGraph::new();
    for (idx, line) in BufReader::new(source).lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value =
            serde_json::from_str(&line).map_err(|e| parse_error(line_no, e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| parse_error(line_no, "expected a JSON object"))?;
        let head = match obj.get(&opts.head_key) {
            Some(Value::String(s)) => {
                KnowledgeHead::new(s).map_err(|e| parse_error(line_no, e.to_string()))?
            }
            _ => return Err(parse_error(line_no, format!("missing string field `{}`", opts.head_key))),
        };
        let relation = match obj.get(&opts.relation_key) {
            Some(Value::String(s)) => s.clone(),
            _ => {
                return Err(parse_error(
                    line_no,
                    format!("missing string field `{}`", opts.relation_key),
                ))
            }
        };
        let tails = match obj.get(&opts.tails_key) {
            None | Some(Value::Null) => Vec::new(),
            Some(Value::String(s)) => vec![s.clone()],
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| {
                    v.as_str()
                        .map(str::to_string)
                        .ok_or_else(|| parse_error(line_no, "tails must be strings"))
                })
                .collect::<Result<_, _>>()?,
            Some(_) => {
                return Err(parse_error(
                    line_no,
                    format!("field `{}` must be a string or list", opts.tails_key),
                ))
            }
        };
        let tuple = KnowledgeTuple::new(head, relation, tails)
            .map_err(|e| parse_error(line_no, e.to_string()))?;
        graph.push(tuple);
    }
    Ok(graph)
}

fn write_jsonl<W: Write>(
    graph: &KnowledgeGraph,
    opts: &JsonlOptions,
    mut sink: W,
) -> Result<(), KnowledgeError> {
    // keys are emitted in a fixed order so output is byte-stable
    let head_key = serde_json::to_string(&opts.head_key).expect("string serializes");
    let relation_key = serde_json::to_string(&opts.relation_key).expect("string serializes");
    let tails_key = serde_json::to_string(&opts.tails_key).expect("string serializes");
    for t in graph {
        writeln!(
            sink,
            "{{{}:{},{}:{},{}:{}}}",
            head_key,
            serde_json::to_string(t.head.text()).expect("string serializes"),
            relation_key,
            serde_json::to_string(&t.relation).expect("string serializes"),
            tails_key,
            serde_json::to_string(&t.tails).expect("strings serialize"),
        )?;
    }
    sink.flush()?;
    Ok(())
}

fn parse_csv<R: Read>(source: R, opts: &CsvOptions) -> Result<KnowledgeGraph, KnowledgeError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(opts.separator)
        .has_headers(opts.header)
        .flexible(true)
        .from_reader(source);
    let mut graph = KnowledgeGraph::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            parse_error(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        let head = record
            .get(opts.head_column)
            .ok_or_else(|| parse_error(line, "missing head column"))?;
        let relation = record
            .get(opts.relation_column)
            .ok_or_else(|| parse_error(line, "missing relation column"))?;
        let tails = record
            .iter()
            .enumerate()
            .filter(|(i, f)| *i > opts.relation_column && *i != opts.head_column && !f.is_empty())
            .map(|(_, f)| f.to_string())
            .collect();
        let tuple = KnowledgeHead::new(head)
            .and_then(|h| KnowledgeTuple::new(h, relation, tails))
            .map_err(|e| parse_error(line, e.to_string()))?;
        graph.push(tuple);
    }
    Ok(graph)
}

fn write_csv<W: Write>(
    graph: &KnowledgeGraph,
    opts: &CsvOptions,
    sink: W,
) -> Result<(), KnowledgeError> {
    let mut writer = csv::WriterBuilder::new()
        .delimiter(opts.separator)
        .flexible(true)
        .from_writer(sink);
    let width = opts.head_column.max(opts.relation_column) + 1;
    if opts.header {
        let mut header = vec![String::new(); width];
        header[opts.head_column] = "head".into();
        header[opts.relation_column] = "relation".into();
        header.push("tails".into());
        writer.write_record(&header).map_err(csv_io)?;
    }
    for t in graph {
        let mut row = vec![String::new(); width];
        row[opts.head_column] = t.head.text().to_string();
        row[opts.relation_column] = t.relation.clone();
        row.extend(t.tails.iter().cloned());
        writer.write_record(&row).map_err(csv_io)?;
    }
    writer.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> KnowledgeError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => KnowledgeError::Io(io),
        other => KnowledgeError::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pipe_csv() -> ParseOptions {
        ParseOptions {
            csv: CsvOptions {
                separator: b'|',
                ..CsvOptions::default()
            },
            ..ParseOptions::default()
        }
    }

    #[test]
    fn parses_pipe_separated_rows() {
        let g = parse_graph(
            "PersonX plays piano|xNeed|to practice\n".as_bytes(),
            GraphFormat::Csv,
            &pipe_csv(),
        )
        .unwrap();
        assert_eq!(g.len(), 1);
        let t = &g.tuples()[0];
        assert_eq!(t.head.text(), "PersonX plays piano");
        assert_eq!(t.relation, "xNeed");
        assert_eq!(t.tails, ["to practice"]);
    }

    #[test]
    fn csv_extra_columns_are_tails() {
        let g = parse_graph("h|r|a|b\nk|r\n".as_bytes(), GraphFormat::Csv, &pipe_csv()).unwrap();
        assert_eq!(g.tuples()[0].tails, ["a", "b"]);
        assert!(g.tuples()[1].tails.is_empty());
    }

    #[test]
    fn csv_header_row_is_skipped() {
        let mut opts = pipe_csv();
        opts.csv.header = true;
        let g = parse_graph("head|relation|tail\nh|r|t\n".as_bytes(), GraphFormat::Csv, &opts)
            .unwrap();
        assert_eq!(g.len(), 1);
    }

    #[test]
    fn csv_missing_relation_names_line() {
        let err = parse_graph("h|r|t\nlonely\n".as_bytes(), GraphFormat::Csv, &pipe_csv())
            .unwrap_err();
        assert!(matches!(err, KnowledgeError::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn parses_jsonl_with_custom_keys() {
        let opts = ParseOptions {
            jsonl: JsonlOptions {
                head_key: "source".into(),
                relation_key: "rel".into(),
                tails_key: "targets".into(),
            },
            ..ParseOptions::default()
        };
        let g = parse_graph(
            r#"{"source":"s","rel":"xNeed","targets":["t"]}"#.as_bytes(),
            GraphFormat::Jsonl,
            &opts,
        )
        .unwrap();
        let t = &g.tuples()[0];
        assert_eq!((t.head.text(), t.relation.as_str()), ("s", "xNeed"));
        assert_eq!(t.tails, ["t"]);
    }

    #[test]
    fn jsonl_missing_tails_is_empty() {
        let g = parse_graph(
            "{\"head\":\"h\",\"relation\":\"r\"}\n\n".as_bytes(),
            GraphFormat::Jsonl,
            &ParseOptions::default(),
        )
        .unwrap();
        assert!(g.tuples()[0].tails.is_empty());
    }

    #[test]
    fn jsonl_malformed_line_reports_line_number() {
        let err = parse_graph(
            "{\"head\":\"h\",\"relation\":\"r\"}\n{oops\n".as_bytes(),
            GraphFormat::Jsonl,
            &ParseOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, KnowledgeError::Parse { line: 2, .. }));
    }

    #[test]
    fn empty_input_is_empty_graph() {
        for format in [GraphFormat::Csv, GraphFormat::Jsonl] {
            let g = parse_graph("".as_bytes(), format, &ParseOptions::default()).unwrap();
            assert!(g.is_empty());
        }
    }

    #[test]
    fn unknown_format_is_rejected() {
        assert!(matches!(
            "xml".parse::<GraphFormat>(),
            Err(KnowledgeError::UnknownFormat(_))
        ));
    }

    #[test]
    fn jsonl_is_canonical() {
        let g: KnowledgeGraph = [KnowledgeTuple::from_parts("h", "r", ["t1", "t2"]).unwrap()]
            .into_iter()
            .collect();
        let mut out = Vec::new();
        serialize_graph(&g, GraphFormat::Jsonl, &ParseOptions::default(), &mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "{\"head\":\"h\",\"relation\":\"r\",\"tails\":[\"t1\",\"t2\"]}\n"
        );

        let mut out = Vec::new();
        serialize_graph(&KnowledgeGraph::new(), GraphFormat::Jsonl, &ParseOptions::default(), &mut out)
            .unwrap();
        assert!(out.is_empty());
    }
}

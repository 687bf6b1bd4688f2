//! JSON Lines persistence for prompts, synthesized records and configs.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::config::SynthesisConfig;
use crate::record::{Origin, RecordError, Role, Span, SynthesisRecord, TerminatedBy};
use crate::text::char_len;

/// Environment variable naming a configuration file.
pub const CONFIG_ENV: &str = "TESSY_CONFIG";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: duplicate id {id:?} (first seen on line {first_line})")]
    DuplicateId {
        id: String,
        first_line: usize,
        line: usize,
    },
    #[error("line {line}: record {id:?}: {source}")]
    Invalid {
        line: usize,
        id: String,
        #[source]
        source: RecordError,
    },
    #[error("config: {0}")]
    Config(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptEntry {
    pub id: String,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tags: Option<Vec<String>>,
}

impl PromptEntry {
    pub fn new(id: impl Into<String>, question: impl Into<String>) -> Self {
        PromptEntry {
            id: id.into(),
            question: question.into(),
            tags: None,
        }
    }
}

/// Non-blank lines with 1-based line numbers.
fn lines(path: &Path) -> Result<Vec<(usize, String)>, DatasetError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

pub fn parse_prompts<I>(lines: I) -> Result<Vec<PromptEntry>, DatasetError>
where
    I: IntoIterator<Item = (usize, String)>,
{
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut out = Vec::new();
    for (line, text) in lines {
        let entry: PromptEntry = serde_json::from_str(&text).map_err(|e| DatasetError::Parse {
            line,
            message: e.to_string(),
        })?;
        if let Some(&first_line) = seen.get(&entry.id) {
            return Err(DatasetError::DuplicateId {
                id: entry.id,
                first_line,
                line,
            });
        }
        seen.insert(entry.id.clone(), line);
        out.push(entry);
    }
    Ok(out)
}

pub fn read_prompts(path: &Path) -> Result<Vec<PromptEntry>, DatasetError> {
    parse_prompts(lines(path)?)
}

pub fn write_prompts(prompts: &[PromptEntry], path: &Path) -> Result<(), DatasetError> {
    write_lines(path, prompts.iter().map(|p| serde_json::to_string(p).expect("prompt serializes")))
}

fn write_lines<I: IntoIterator<Item = String>>(path: &Path, lines: I) -> Result<(), DatasetError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for line in lines {
        w.write_all(line.as_bytes()).map_err(io_err(path))?;
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireSpan {
    index: usize,
    origin: Origin,
    role: Role,
    text: String,
    truncated: bool,
    raw_length_chars: usize,
    start: usize,
    end: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct WireRecord {
    id: String,
    prompt: String,
    strategy: String,
    config_fingerprint: String,
    terminated_by: TerminatedBy,
    spans: Vec<WireSpan>,
    #[serde(default)]
    meta: Map<String, Value>,
}

/// One JSON line for `record`, with character offsets per span.
pub fn record_to_line(record: &SynthesisRecord) -> String {
    let spans = record
        .spans
        .iter()
        .zip(record.span_ranges())
        .map(|(s, (start, end))| WireSpan {
            index: s.index,
            origin: s.origin,
            role: s.role,
            text: s.text.clone(),
            truncated: s.truncated,
            raw_length_chars: s.raw_length_chars,
            start,
            end,
        })
        .collect();
    let wire = WireRecord {
        id: record.id.clone(),
        prompt: record.prompt.clone(),
        strategy: record.strategy.clone(),
        config_fingerprint: record.config_fingerprint.clone(),
        terminated_by: record.terminated_by,
        spans,
        meta: record.meta.clone(),
    };
    serde_json::to_string(&wire).expect("record serializes")
}

/// Parses and validates one record line.
pub fn record_from_line(line: usize, text: &str) -> Result<SynthesisRecord, DatasetError> {
    let wire: WireRecord = serde_json::from_str(text).map_err(|e| DatasetError::Parse {
        line,
        message: e.to_string(),
    })?;
    let invalid = |source| DatasetError::Invalid {
        line,
        id: wire.id.clone(),
        source,
    };
    let mut pos = 0;
    for s in &wire.spans {
        let len = char_len(&s.text);
        if s.start != pos {
            let detail = if s.start < pos { "overlaps previous span" } else { "leaves a gap" };
            return Err(invalid(RecordError::Partition {
                index: s.index,
                detail: format!("start {} {detail} ending at {pos}", s.start),
            }));
        }
        if s.end != s.start + len {
            return Err(invalid(RecordError::Partition {
                index: s.index,
                detail: format!("range [{}, {}) does not match text length {len}", s.start, s.end),
            }));
        }
        pos = s.end;
    }
    let record = SynthesisRecord {
        id: wire.id.clone(),
        prompt: wire.prompt.clone(),
        spans: wire
            .spans
            .iter()
            .map(|s| Span {
                index: s.index,
                origin: s.origin,
                role: s.role,
                text: s.text.clone(),
                truncated: s.truncated,
                raw_length_chars: s.raw_length_chars,
            })
            .collect(),
        strategy: wire.strategy.clone(),
        config_fingerprint: wire.config_fingerprint.clone(),
        terminated_by: wire.terminated_by,
        meta: wire.meta.clone(),
    };
    record.validate().map_err(invalid)?;
    Ok(record)
}

pub fn write_records(records: &[SynthesisRecord], path: &Path) -> Result<(), DatasetError> {
    write_lines(path, records.iter().map(record_to_line))
}

pub fn read_records(path: &Path) -> Result<Vec<SynthesisRecord>, DatasetError> {
    lines(path)?
        .into_iter()
        .map(|(line, text)| record_from_line(line, &text))
        .collect()
}

/// Every invariant violation in a records file, as (line, message).
pub fn audit_records(path: &Path) -> Result<Vec<(usize, String)>, DatasetError> {
    Ok(lines(path)?
        .into_iter()
        .filter_map(|(line, text)| record_from_line(line, &text).err().map(|e| (line, e.to_string())))
        .collect())
}

/// A plain prompt/response pair for SFT consumers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SftExample {
    pub prompt: String,
    pub response: String,
}

/// Think text closed by the end-of-think marker, then the answer.
pub fn export_example(record: &SynthesisRecord, default_marker: &str) -> SftExample {
    let marker = record.marker().unwrap_or(default_marker);
    let mut response = record.think_text();
    if !response.ends_with(marker) {
        response.push_str(marker);
    }
    response.push_str(&record.answer_text());
    SftExample {
        prompt: record.prompt.clone(),
        response,
    }
}

pub fn write_export(records: &[SynthesisRecord], path: &Path, default_marker: &str) -> Result<(), DatasetError> {
    write_lines(
        path,
        records
            .iter()
            .map(|r| serde_json::to_string(&export_example(r, default_marker)).expect("pair serializes")),
    )
}

/// Loads a configuration file; falls back to `$TESSY_CONFIG`, then defaults.
pub fn load_config(path: Option<&Path>) -> Result<SynthesisConfig, DatasetError> {
    let env_path = std::env::var_os(CONFIG_ENV).map(PathBuf::from);
    let Some(path) = path.map(Path::to_path_buf).or(env_path) else {
        return Ok(SynthesisConfig::default());
    };
    let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|e| DatasetError::Config(format!("{}: {e}", path.display())))
}

//! Dataset ingestion: JSONL (one object per line) and a CSV importer with
//! the same column names, plus split-file IO.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use fedshot_core::data::{LabeledExample, Polarity, SplitSet};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("{path}:{line}: duplicate id '{id}'")]
    DuplicateId {
        path: PathBuf,
        line: usize,
        id: String,
    },
    #[error("{path}:{line}: invalid category for id '{id}': {reason}")]
    InvalidCategory {
        path: PathBuf,
        line: usize,
        id: String,
        reason: String,
    },
    #[error("{path}: empty corpus")]
    EmptyCorpus { path: PathBuf },
}

/// One validation finding, tied to a line.
#[derive(Debug, Clone)]
pub struct LineDiagnostic {
    pub line: usize,
    pub message: String,
}

/// Outcome of validating a single file.
#[derive(Debug)]
pub struct FileReport {
    pub path: PathBuf,
    pub records: usize,
    pub diagnostics: Vec<LineDiagnostic>,
}

impl FileReport {
    pub fn passed(&self) -> bool {
        self.diagnostics.is_empty()
    }
}

#[derive(Debug, Default, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    id: Option<String>,
    text: Option<String>,
    language: Option<String>,
    target_group: Option<String>,
    polarity: Option<String>,
    profanity: Option<bool>,
    source: Option<String>,
    ai_generated: Option<bool>,
}

enum LineError {
    Parse(String),
    InvalidCategory { id: String, reason: String },
}

fn finish_record(raw: RawRecord) -> Result<LabeledExample, LineError> {
    let id = match raw.id {
        Some(id) if !id.trim().is_empty() => id,
        _ => return Err(LineError::Parse("missing field 'id'".into())),
    };
    let text = match raw.text {
        Some(t) if !t.trim().is_empty() => t,
        Some(_) => return Err(LineError::Parse(format!("id '{id}': text is empty"))),
        None => return Err(LineError::Parse(format!("id '{id}': missing field 'text'"))),
    };
    let language = raw
        .language
        .ok_or_else(|| LineError::Parse(format!("id '{id}': missing field 'language'")))?;
    let target_group = raw
        .target_group
        .ok_or_else(|| LineError::Parse(format!("id '{id}': missing field 'target_group'")))?;
    let polarity = match raw.polarity {
        None => {
            return Err(LineError::InvalidCategory {
                id,
                reason: "missing polarity".into(),
            })
        }
        Some(p) => match Polarity::parse(&p) {
            Some(p) => p,
            None => {
                return Err(LineError::InvalidCategory {
                    id,
                    reason: format!("unknown polarity '{p}'"),
                })
            }
        },
    };
    let profanity = match raw.profanity {
        Some(p) => p,
        None => {
            return Err(LineError::InvalidCategory {
                id,
                reason: "missing profanity flag".into(),
            })
        }
    };
    Ok(LabeledExample {
        id,
        text,
        language,
        target_group,
        polarity,
        profanity,
        source: raw.source.filter(|s| !s.is_empty()),
        ai_generated: raw.ai_generated.unwrap_or(false),
    })
}

fn parse_jsonl_line(line: &str) -> Result<LabeledExample, LineError> {
    let raw: RawRecord = serde_json::from_str(line).map_err(|e| LineError::Parse(e.to_string()))?;
    finish_record(raw)
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Load and validate a corpus, stopping at the first problem.
pub fn load_corpus(path: &Path) -> Result<Vec<LabeledExample>, CorpusError> {
    match collect(path, true)? {
        Collected::Examples(examples) => {
            if examples.is_empty() {
                return Err(CorpusError::EmptyCorpus {
                    path: path.to_path_buf(),
                });
            }
            Ok(examples)
        }
        Collected::FirstError(e) => Err(e),
        Collected::Report(_) => unreachable!("collect(fail_fast = true) never builds a report"),
    }
}

/// Validate a file, collecting every diagnostic instead of stopping.
pub fn validate_file(path: &Path) -> Result<FileReport, CorpusError> {
    match collect(path, false)? {
        Collected::Report(report) => Ok(report),
        _ => unreachable!("collect(fail_fast = false) always returns a report"),
    }
}

enum Collected {
    Examples(Vec<LabeledExample>),
    Report(FileReport),
    FirstError(CorpusError),
}

fn collect(path: &Path, fail_fast: bool) -> Result<Collected, CorpusError> {
    let records: Vec<ParsedLine> = if is_csv(path) {
        read_csv_records(path)?
    } else {
        let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        text.lines()
            .enumerate()
            .filter(|(_, line)| !line.trim().is_empty())
            .map(|(i, line)| (i + 1, parse_jsonl_line(line)))
            .collect()
    };

    let mut examples = Vec::new();
    let mut diagnostics = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    for (line, outcome) in records {
        match outcome {
            Ok(example) => {
                if !seen.insert(example.id.clone()) {
                    if fail_fast {
                        return Ok(Collected::FirstError(CorpusError::DuplicateId {
                            path: path.to_path_buf(),
                            line,
                            id: example.id,
                        }));
                    }
                    diagnostics.push(LineDiagnostic {
                        line,
                        message: format!("duplicate id '{}'", example.id),
                    });
                } else {
                    examples.push(example);
                }
            }
            Err(LineError::Parse(reason)) => {
                if fail_fast {
                    return Ok(Collected::FirstError(CorpusError::Parse {
                        path: path.to_path_buf(),
                        line,
                        reason,
                    }));
                }
                diagnostics.push(LineDiagnostic {
                    line,
                    message: reason,
                });
            }
            Err(LineError::InvalidCategory { id, reason }) => {
                if fail_fast {
                    return Ok(Collected::FirstError(CorpusError::InvalidCategory {
                        path: path.to_path_buf(),
                        line,
                        id,
                        reason,
                    }));
                }
                diagnostics.push(LineDiagnostic {
                    line,
                    message: format!("invalid category for id '{id}': {reason}"),
                });
            }
        }
    }
    if !fail_fast {
        if examples.is_empty() && diagnostics.is_empty() {
            diagnostics.push(LineDiagnostic {
                line: 0,
                message: "empty corpus".into(),
            });
        }
        return Ok(Collected::Report(FileReport {
            path: path.to_path_buf(),
            records: examples.len(),
            diagnostics,
        }));
    }
    Ok(Collected::Examples(examples))
}

fn parse_bool(raw: &str) -> Option<bool> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "true" | "1" => Some(true),
        "false" | "0" => Some(false),
        _ => None,
    }
}

type ParsedLine = (usize, Result<LabeledExample, LineError>);

fn read_csv_records(path: &Path) -> Result<Vec<ParsedLine>, CorpusError> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => CorpusError::Io {
                path: path.to_path_buf(),
                source: std::io::Error::other(e.to_string()),
            },
            _ => CorpusError::Parse {
                path: path.to_path_buf(),
                line: 1,
                reason: e.to_string(),
            },
        })?;
    let headers = reader
        .headers()
        .map_err(|e| CorpusError::Parse {
            path: path.to_path_buf(),
            line: 1,
            reason: e.to_string(),
        })?
        .clone();
    let column = |name: &str| headers.iter().position(|h| h == name);

    let mut out = Vec::new();
    for (index, record) in reader.records().enumerate() {
        let line = index + 2; // header is line 1
        match record {
            Err(e) => out.push((line, Err(LineError::Parse(e.to_string())))),
            Ok(record) => {
                let field =
                    |name: &str| column(name).and_then(|i| record.get(i)).map(str::to_string);
                let profanity = match field("profanity") {
                    None => None,
                    Some(raw) => match parse_bool(&raw) {
                        Some(b) => Some(b),
                        None => {
                            out.push((
                                line,
                                Err(LineError::Parse(format!("bad profanity value '{raw}'"))),
                            ));
                            continue;
                        }
                    },
                };
                let ai_generated = field("ai_generated").and_then(|raw| parse_bool(&raw));
                let raw = RawRecord {
                    id: field("id"),
                    text: field("text"),
                    language: field("language"),
                    target_group: field("target_group"),
                    polarity: field("polarity"),
                    profanity,
                    source: field("source").filter(|s| !s.is_empty()),
                    ai_generated,
                };
                out.push((line, finish_record(raw)));
            }
        }
    }
    Ok(out)
}

// ------------------------------------------------------------- split files --

pub fn write_split(path: &Path, split: &SplitSet) -> Result<(), CorpusError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    }
    let mut bytes = serde_json::to_vec_pretty(split).expect("split serializes");
    bytes.push(b'\n');
    std::fs::write(path, bytes).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_split(path: &Path) -> Result<SplitSet, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| CorpusError::Parse {
        path: path.to_path_buf(),
        line: 0,
        reason: e.to_string(),
    })
}

/// Read a test-id list: either a bare JSON array or an object with a `test`
/// key (a split file works).
pub fn read_test_ids(path: &Path) -> Result<Vec<String>, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| CorpusError::Parse {
        path: path.to_path_buf(),
        line: 0,
        reason: e.to_string(),
    })?;
    let array = match &value {
        serde_json::Value::Array(items) => items,
        serde_json::Value::Object(map) => match map.get("test") {
            Some(serde_json::Value::Array(items)) => items,
            _ => {
                return Err(CorpusError::Parse {
                    path: path.to_path_buf(),
                    line: 0,
                    reason: "expected a JSON array of ids or an object with a 'test' array".into(),
                })
            }
        },
        _ => {
            return Err(CorpusError::Parse {
                path: path.to_path_buf(),
                line: 0,
                reason: "expected a JSON array of ids or an object with a 'test' array".into(),
            })
        }
    };
    array
        .iter()
        .map(|v| {
            v.as_str()
                .map(String::from)
                .ok_or_else(|| CorpusError::Parse {
                    path: path.to_path_buf(),
                    line: 0,
                    reason: "test ids must be strings".into(),
                })
        })
        .collect()
}

/// Select corpus examples by id, in the id list's order.
pub fn select_by_ids(
    corpus: &[LabeledExample],
    ids: &[String],
) -> Result<Vec<LabeledExample>, String> {
    let by_id: std::collections::BTreeMap<&str, &LabeledExample> =
        corpus.iter().map(|e| (e.id.as_str(), e)).collect();
    ids.iter()
        .map(|id| {
            by_id
                .get(id.as_str())
                .map(|&e| e.clone())
                .ok_or_else(|| format!("id '{id}' not found in corpus"))
        })
        .collect()
}

//! Line-delimited interchange format for annotated procedures.
//!
//! A corpus is a UTF-8 file with one JSON record per line:
//!
//! ```text
//! {"id": str, "source": "US"|"EP"|"OTHER", "patent_id": str,
//!  "sentences": [{"tokens": [str], "bio": [str],
//!                 "edges": [{"head": int, "tail": int, "label": str}]}],
//!  "slots": {str: [str]}}
//! ```
//!
//! Edge endpoints are indices into the sentence's mentions in BIO-decoded
//! order. The label inventory is declared once in a sidecar manifest at
//! `<corpus path>.manifest.json`. Unknown record fields are rejected.

mod fixtures;

pub use fixtures::{generate_fixtures, tokenize, Blank, BlankKind, FixtureError, FixtureSpec, SplitMix64, Template, TemplateEdge};

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{validate_document, CorpusError, ProcedureDoc, SemanticEdge, SentenceGraph, Source, Token, ValidationReport};
use crate::schema::{Schema, SchemaError};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("missing corpus manifest {0}")]
    MissingManifest(PathBuf),
    #[error("bad manifest {path}: {message}")]
    BadManifest { path: PathBuf, message: String },
    #[error("line {line}: parse error: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: schema violation: {report}")]
    Schema { line: usize, report: ValidationReport },
    #[error("line {line}: duplicate id {id:?} (first seen on line {first_line})")]
    DuplicateId { id: String, first_line: usize, line: usize },
}

impl IngestError {
    /// The 1-based corpus line the error refers to, if any.
    pub fn line(&self) -> Option<usize> {
        match self {
            IngestError::Parse { line, .. }
            | IngestError::Schema { line, .. }
            | IngestError::DuplicateId { line, .. } => Some(*line),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRecord {
    pub head: usize,
    pub tail: usize,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SentenceRecord {
    pub tokens: Vec<String>,
    pub bio: Vec<String>,
    pub edges: Vec<EdgeRecord>,
}

/// The wire shape of one procedure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocRecord {
    pub id: String,
    pub source: Source,
    pub patent_id: String,
    pub sentences: Vec<SentenceRecord>,
    pub slots: BTreeMap<String, Vec<String>>,
}

impl DocRecord {
    pub fn from_doc(doc: &ProcedureDoc) -> Self {
        DocRecord {
            id: doc.id.clone(),
            source: doc.source,
            patent_id: doc.patent_id.clone(),
            sentences: doc
                .sentences
                .iter()
                .map(|s| SentenceRecord {
                    tokens: s.tokens.iter().map(|t| t.word.clone()).collect(),
                    bio: s.tokens.iter().map(|t| t.entity_bio.clone()).collect(),
                    edges: s
                        .edges
                        .iter()
                        .map(|e| EdgeRecord {
                            head: e.head,
                            tail: e.tail,
                            label: e.label.clone(),
                        })
                        .collect(),
                })
                .collect(),
            slots: doc.slots.clone(),
        }
    }

    pub fn into_doc(self) -> Result<ProcedureDoc, RecordError> {
        let mut sentences = Vec::with_capacity(self.sentences.len());
        for (si, s) in self.sentences.into_iter().enumerate() {
            if s.tokens.len() != s.bio.len() {
                return Err(RecordError::LengthMismatch {
                    sentence: si,
                    tokens: s.tokens.len(),
                    tags: s.bio.len(),
                });
            }
            let tokens = s
                .tokens
                .into_iter()
                .zip(s.bio)
                .map(|(word, entity_bio)| Token { word, entity_bio })
                .collect();
            let edges = s
                .edges
                .into_iter()
                .map(|e| SemanticEdge::new(e.head, e.tail, e.label))
                .collect();
            let graph = SentenceGraph::new(tokens, edges).map_err(|source| RecordError::Bio { sentence: si, source })?;
            sentences.push(graph);
        }
        Ok(ProcedureDoc {
            id: self.id,
            source: self.source,
            patent_id: self.patent_id,
            sentences,
            slots: self.slots,
        })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RecordError {
    #[error("sentence {sentence}: {tokens} tokens but {tags} BIO tags")]
    LengthMismatch { sentence: usize, tokens: usize, tags: usize },
    #[error("sentence {sentence}: {source}")]
    Bio {
        sentence: usize,
        #[source]
        source: CorpusError,
    },
}

/// Serializes one document as a single interchange line (no newline).
pub fn to_record_line(doc: &ProcedureDoc) -> String {
    serde_json::to_string(&DocRecord::from_doc(doc)).expect("record serialization cannot fail")
}

/// Parses one interchange line into a document (structure only, no schema check).
pub fn parse_record_line(line: &str) -> Result<ProcedureDoc, String> {
    let record: DocRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    record.into_doc().map_err(|e| e.to_string())
}

pub fn manifest_path(corpus: &Path) -> PathBuf {
    let mut name = corpus.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

pub fn read_manifest(corpus: &Path) -> Result<Schema, IngestError> {
    let path = manifest_path(corpus);
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(IngestError::MissingManifest(path)),
        Err(source) => return Err(IngestError::Io { path, source }),
    };
    let schema: Schema = serde_json::from_str(&text).map_err(|e| IngestError::BadManifest {
        path: path.clone(),
        message: e.to_string(),
    })?;
    schema.check().map_err(|e: SchemaError| IngestError::BadManifest {
        path,
        message: e.to_string(),
    })?;
    Ok(schema)
}

/// Streams documents from a corpus file in file order. The stream ends
/// after the first error.
pub struct CorpusReader {
    schema: Schema,
    lines: io::Lines<BufReader<File>>,
    path: PathBuf,
    line_no: usize,
    seen: HashMap<String, usize>,
    failed: bool,
}

impl CorpusReader {
    /// Opens a corpus, validating records against the schema in its manifest.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, IngestError> {
        let path = path.as_ref();
        let schema = read_manifest(path)?;
        Self::open_inner(path, schema)
    }

    /// Opens a corpus, validating records against `schema` instead of the
    /// manifest's. The manifest must still exist.
    pub fn with_schema(path: impl AsRef<Path>, schema: Schema) -> Result<Self, IngestError> {
        let path = path.as_ref();
        read_manifest(path)?;
        Self::open_inner(path, schema)
    }

    fn open_inner(path: &Path, schema: Schema) -> Result<Self, IngestError> {
        let file = File::open(path).map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(CorpusReader {
            schema,
            lines: BufReader::new(file).lines(),
            path: path.to_path_buf(),
            line_no: 0,
            seen: HashMap::new(),
            failed: false,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    fn next_doc(&mut self) -> Option<Result<ProcedureDoc, IngestError>> {
        let line = match self.lines.next()? {
            Ok(l) => l,
            Err(source) => {
                return Some(Err(IngestError::Io {
                    path: self.path.clone(),
                    source,
                }))
            }
        };
        self.line_no += 1;
        let line_no = self.line_no;
        let doc = match parse_record_line(&line) {
            Ok(d) => d,
            Err(message) => return Some(Err(IngestError::Parse { line: line_no, message })),
        };
        let report = validate_document(&doc, &self.schema);
        if !report.is_valid() {
            return Some(Err(IngestError::Schema { line: line_no, report }));
        }
        if let Some(&first_line) = self.seen.get(&doc.id) {
            return Some(Err(IngestError::DuplicateId {
                id: doc.id,
                first_line,
                line: line_no,
            }));
        }
        self.seen.insert(doc.id.clone(), line_no);
        Some(Ok(doc))
    }
}

impl Iterator for CorpusReader {
    type Item = Result<ProcedureDoc, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        let item = self.next_doc();
        if matches!(item, Some(Err(_))) {
            self.failed = true;
        }
        item
    }
}

/// Reads a whole corpus into memory, returning its manifest schema too.
pub fn read_corpus(path: impl AsRef<Path>) -> Result<(Schema, Vec<ProcedureDoc>), IngestError> {
    let reader = CorpusReader::open(path)?;
    let schema = reader.schema().clone();
    let docs = reader.collect::<Result<Vec<_>, _>>()?;
    Ok((schema, docs))
}

/// Writes `docs` to `path` and the schema manifest next to it.
pub fn write_corpus<'a>(
    docs: impl IntoIterator<Item = &'a ProcedureDoc>,
    schema: &Schema,
    path: impl AsRef<Path>,
) -> Result<(), IngestError> {
    let path = path.as_ref();
    let io_err = |p: &Path| {
        let p = p.to_path_buf();
        move |source| IngestError::Io { path: p, source }
    };
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    for doc in docs {
        out.write_all(to_record_line(doc).as_bytes()).map_err(io_err(path))?;
        out.write_all(b"\n").map_err(io_err(path))?;
    }
    out.flush().map_err(io_err(path))?;

    let manifest = manifest_path(path);
    let text = serde_json::to_string_pretty(schema).expect("schema serialization cannot fail");
    std::fs::write(&manifest, text + "\n").map_err(io_err(&manifest))?;
    Ok(())
}

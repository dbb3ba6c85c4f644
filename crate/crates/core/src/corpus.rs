//! Annotated procedure data model: tokens with BIO entity tags, mentions
//! decoded from those tags, labelled mention-to-mention edges, and
//! protocol-level slot values.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{BioTag, Schema};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CorpusError {
    #[error("malformed BIO tag {tag:?} at token {index}")]
    BadTag { index: usize, tag: String },
    #[error("I- without preceding B- at token {index}")]
    OrphanInside { index: usize },
    #[error("unknown edge label {0:?}")]
    UnknownEdgeLabel(String),
    #[error("span {start}..{end} outside sentence of {len} tokens")]
    SpanOutOfBounds { start: usize, end: usize, len: usize },
    #[error("edge {edge} references mention {mention}, sentence has {count}")]
    BadEdgeEndpoint {
        edge: usize,
        mention: usize,
        count: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub word: String,
    pub entity_bio: String,
}

impl Token {
    pub fn new(word: impl Into<String>, entity_bio: impl Into<String>) -> Self {
        Token {
            word: word.into(),
            entity_bio: entity_bio.into(),
        }
    }

    pub fn outside(word: impl Into<String>) -> Self {
        Token::new(word, "O")
    }
}

/// A labelled token span `[start, end)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mention {
    pub start: usize,
    pub end: usize,
    pub label: String,
}

impl Mention {
    /// The token edges attach to: the first token of the mention.
    pub fn anchor(&self) -> usize {
        self.start
    }

    pub fn range(&self) -> Range<usize> {
        self.start..self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SemanticEdge {
    pub head: usize,
    pub tail: usize,
    pub label: String,
}

impl SemanticEdge {
    pub fn new(head: usize, tail: usize, label: impl Into<String>) -> Self {
        SemanticEdge {
            head,
            tail,
            label: label.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "outgoing")]
    Outgoing,
    #[serde(rename = "incoming")]
    Incoming,
}

/// Decodes the maximal BIO spans of `tokens` into mentions.
pub fn decode_mentions(tokens: &[Token]) -> Result<Vec<Mention>, CorpusError> {
    let mut mentions: Vec<Mention> = Vec::new();
    let mut open: Option<usize> = None;
    for (i, tok) in tokens.iter().enumerate() {
        match BioTag::parse(&tok.entity_bio) {
            Some(BioTag::Outside) => open = None,
            Some(BioTag::Begin(label)) => {
                mentions.push(Mention {
                    start: i,
                    end: i + 1,
                    label: label.to_string(),
                });
                open = Some(mentions.len() - 1);
            }
            Some(BioTag::Inside(label)) => match open {
                Some(m) if mentions[m].label == label => mentions[m].end = i + 1,
                _ => return Err(CorpusError::OrphanInside { index: i }),
            },
            None => {
                return Err(CorpusError::BadTag {
                    index: i,
                    tag: tok.entity_bio.clone(),
                })
            }
        }
    }
    Ok(mentions)
}

/// Per-token BIO tags for `len` tokens covered by `mentions`.
pub fn encode_bio(len: usize, mentions: &[Mention]) -> Vec<String> {
    let mut tags = vec!["O".to_string(); len];
    for m in mentions {
        for (i, tag) in tags.iter_mut().enumerate().take(m.end).skip(m.start) {
            let prefix = if i == m.start { "B-" } else { "I-" };
            *tag = format!("{prefix}{}", m.label);
        }
    }
    tags
}

/// One sentence with its semantic action graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceGraph {
    pub tokens: Vec<Token>,
    pub mentions: Vec<Mention>,
    pub edges: Vec<SemanticEdge>,
}

impl SentenceGraph {
    /// Builds a sentence, decoding mentions from the tokens' BIO tags.
    pub fn new(tokens: Vec<Token>, edges: Vec<SemanticEdge>) -> Result<Self, CorpusError> {
        let mentions = decode_mentions(&tokens)?;
        Ok(SentenceGraph {
            tokens,
            mentions,
            edges,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Space-joined surface text.
    pub fn text(&self) -> String {
        self.span_text(0..self.tokens.len())
    }

    pub fn span_text(&self, span: Range<usize>) -> String {
        let mut out = String::new();
        for tok in &self.tokens[span] {
            if !out.is_empty() {
                out.push(' ');
            }
            out.push_str(&tok.word);
        }
        out
    }

    /// Anchors of the opposite endpoints of every `label` edge whose near
    /// endpoint (head for outgoing, tail for incoming) is anchored inside
    /// `span`. Sorted and deduplicated.
    pub fn edge_targets(
        &self,
        schema: &Schema,
        span: Range<usize>,
        label: &str,
        direction: Direction,
    ) -> Result<Vec<usize>, CorpusError> {
        if !schema.has_edge_label(label) {
            return Err(CorpusError::UnknownEdgeLabel(label.to_string()));
        }
        if span.start > span.end || span.end > self.tokens.len() {
            return Err(CorpusError::SpanOutOfBounds {
                start: span.start,
                end: span.end,
                len: self.tokens.len(),
            });
        }
        Ok(self.edge_targets_unchecked(span, label, direction))
    }

    pub(crate) fn edge_targets_unchecked(
        &self,
        span: Range<usize>,
        label: &str,
        direction: Direction,
    ) -> Vec<usize> {
        let mut out = Vec::new();
        for edge in self.edges.iter().filter(|e| e.label == label) {
            let (near, far) = match direction {
                Direction::Outgoing => (edge.head, edge.tail),
                Direction::Incoming => (edge.tail, edge.head),
            };
            let (Some(near), Some(far)) = (self.mentions.get(near), self.mentions.get(far)) else {
                continue;
            };
            if span.contains(&near.anchor()) {
                out.push(far.anchor());
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Source {
    US,
    EP,
    OTHER,
}

/// One synthesis procedure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcedureDoc {
    pub id: String,
    pub source: Source,
    pub patent_id: String,
    pub sentences: Vec<SentenceGraph>,
    pub slots: BTreeMap<String, Vec<String>>,
}

/// Where in a document a violation was found.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub sentence: Option<usize>,
    pub token: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.sentence, self.token) {
            (Some(s), Some(t)) => write!(f, "sentence {s}, token {t}: {}", self.message),
            (Some(s), None) => write!(f, "sentence {s}: {}", self.message),
            _ => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, sentence: Option<usize>, token: Option<usize>, message: impl Into<String>) {
        self.violations.push(Violation {
            sentence,
            token,
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks every data-model invariant of `doc` against `schema`. Problems
/// are reported, never raised.
pub fn validate_document(doc: &ProcedureDoc, schema: &Schema) -> ValidationReport {
    let mut report = ValidationReport::default();
    if doc.id.is_empty() {
        report.push(None, None, "empty document id");
    }
    for (name, values) in &doc.slots {
        if !schema.has_slot(name) {
            report.push(None, None, format!("unknown slot {name:?}"));
        }
        if values.iter().any(String::is_empty) {
            report.push(None, None, format!("empty value in slot {name:?}"));
        }
    }
    for (si, sentence) in doc.sentences.iter().enumerate() {
        validate_sentence(si, sentence, schema, &mut report);
    }
    report
}

fn validate_sentence(si: usize, s: &SentenceGraph, schema: &Schema, report: &mut ValidationReport) {
    let mut prev: Option<&str> = None;
    for (ti, tok) in s.tokens.iter().enumerate() {
        match BioTag::parse(&tok.entity_bio) {
            None => {
                report.push(Some(si), Some(ti), format!("malformed BIO tag {:?}", tok.entity_bio));
                prev = None;
                continue;
            }
            Some(tag) => {
                if let Some(label) = tag.label() {
                    if !schema.has_node_label(label) {
                        report.push(Some(si), Some(ti), format!("unknown node label {label:?}"));
                    }
                }
                if let BioTag::Inside(label) = tag {
                    if prev != Some(label) {
                        report.push(Some(si), Some(ti), "I- without preceding B-");
                    }
                }
                prev = tag.label();
            }
        }
    }

    match decode_mentions(&s.tokens) {
        Ok(decoded) if decoded != s.mentions => {
            report.push(Some(si), None, "mentions differ from the maximal BIO spans");
        }
        _ => {}
    }
    for (mi, m) in s.mentions.iter().enumerate() {
        if m.start >= m.end || m.end > s.tokens.len() {
            report.push(Some(si), None, format!("mention {mi} has invalid span {}..{}", m.start, m.end));
        }
        if !schema.has_node_label(&m.label) {
            report.push(Some(si), None, format!("mention {mi} has unknown node label {:?}", m.label));
        }
        if mi > 0 && s.mentions[mi - 1].end > m.start {
            report.push(Some(si), None, format!("mention {mi} overlaps or precedes mention {}", mi - 1));
        }
    }
    for (ei, e) in s.edges.iter().enumerate() {
        if !schema.has_edge_label(&e.label) {
            report.push(Some(si), None, format!("edge {ei}: unknown edge label {:?}", e.label));
        }
        if e.head == e.tail {
            report.push(Some(si), None, format!("edge {ei}: head equals tail"));
        }
        for end in [e.head, e.tail] {
            if end >= s.mentions.len() {
                report.push(
                    Some(si),
                    None,
                    format!("edge {ei}: mention index {end} out of range ({} mentions)", s.mentions.len()),
                );
            }
        }
    }
}

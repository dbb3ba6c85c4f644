//! Sentence-level inverted index, slot metadata store and docstore.
//!
//! Every token contributes `(word, w)` and `(lower, lowercase(w))`
//! postings, plus `(entity, tag)` when its BIO tag is not `O`. Posting
//! lists hold sentence ids, which are dense and assigned in corpus order.

mod intersect;
mod persist;

pub use intersect::intersect_sorted;
pub use persist::FORMAT_VERSION;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{validate_document, ProcedureDoc, SentenceGraph, ValidationReport};
use crate::ingest::to_record_line;
use crate::query::{SlotFilter, SlotQuery, Term};
use crate::schema::Schema;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("duplicate document id {0:?}")]
    DuplicateId(String),
    #[error("document {id:?} violates the schema: {report}")]
    Schema { id: String, report: ValidationReport },
    #[error("empty term set")]
    EmptyTermSet,
    #[error("{0} is not an index (no manifest.json)")]
    NotAnIndex(PathBuf),
    #[error("index format version {found} is newer than supported version {supported}")]
    FutureVersion { found: u32, supported: u32 },
    #[error("index format version {found} is not supported (expected {supported})")]
    VersionMismatch { found: u32, supported: u32 },
    #[error("checksum mismatch for {0}")]
    Checksum(String),
    #[error("corrupt index file {file}: {message}")]
    Corrupt { file: String, message: String },
    #[error("{0} already exists")]
    AlreadyExists(PathBuf),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// Where a sentence lives.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct SentenceLocator {
    pub sentence_id: u32,
    pub doc_id: String,
    pub sentence_index: u32,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub procedures: u64,
    pub sentences: u64,
    pub tokens: u64,
    pub terms: u64,
    pub postings: u64,
}

/// How slot keywords are compared with slot values. Both modes ignore case.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotMatchMode {
    #[default]
    Substring,
    Exact,
}

impl SlotMatchMode {
    pub fn matches(self, keyword_lower: &str, value: &str) -> bool {
        let value = value.to_lowercase();
        match self {
            SlotMatchMode::Substring => value.contains(keyword_lower),
            SlotMatchMode::Exact => value == keyword_lower,
        }
    }
}

/// Slot values per slot name and document ordinal, verbatim.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SlotStore {
    by_slot: BTreeMap<String, BTreeMap<u32, Vec<String>>>,
}

impl SlotStore {
    fn insert(&mut self, doc: u32, slots: &BTreeMap<String, Vec<String>>) {
        for (name, values) in slots {
            self.by_slot.entry(name.clone()).or_default().insert(doc, values.clone());
        }
    }

    pub fn values(&self, slot: &str, doc: u32) -> &[String] {
        self.by_slot
            .get(slot)
            .and_then(|m| m.get(&doc))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Values of `slot` in `doc` that satisfy `filter`, in stored order.
    pub fn matching_values<'a>(
        &'a self,
        slot: &str,
        doc: u32,
        filter: &SlotFilter,
        mode: SlotMatchMode,
    ) -> Vec<&'a str> {
        let values = self.values(slot, doc);
        match filter {
            SlotFilter::AnyValue => values.iter().map(String::as_str).collect(),
            SlotFilter::Keywords(keywords) => {
                let lowered: Vec<String> = keywords.iter().map(|k| k.to_lowercase()).collect();
                values
                    .iter()
                    .filter(|v| lowered.iter().any(|k| mode.matches(k, v)))
                    .map(String::as_str)
                    .collect()
            }
        }
    }

    fn docs_with(&self, slot: &str) -> impl Iterator<Item = u32> + '_ {
        self.by_slot.get(slot).into_iter().flat_map(|m| m.keys().copied())
    }
}

/// An immutable, queryable index over a corpus.
#[derive(Debug, Clone)]
pub struct IndexHandle {
    schema: Schema,
    docs: Vec<ProcedureDoc>,
    records: Vec<String>,
    doc_by_id: HashMap<String, u32>,
    /// sentence id -> (doc ordinal, sentence index)
    locators: Vec<(u32, u32)>,
    /// doc ordinal -> first sentence id
    doc_start: Vec<u32>,
    postings: HashMap<Term, Vec<u32>>,
    slots: SlotStore,
    stats: CorpusStats,
}

/// Builds an index over `docs` in iteration order. Every document is
/// validated against `schema`.
pub fn build_index(
    docs: impl IntoIterator<Item = ProcedureDoc>,
    schema: &Schema,
) -> Result<IndexHandle, IndexError> {
    let mut builder = IndexBuilder::new(schema.clone());
    for doc in docs {
        builder.add(doc)?;
    }
    Ok(builder.finish())
}

/// Incremental construction of an [`IndexHandle`]; documents are added in
/// corpus order.
pub struct IndexBuilder {
    handle: IndexHandle,
}

impl IndexBuilder {
    pub fn new(schema: Schema) -> Self {
        IndexBuilder {
            handle: IndexHandle {
                schema,
                docs: Vec::new(),
                records: Vec::new(),
                doc_by_id: HashMap::new(),
                locators: Vec::new(),
                doc_start: Vec::new(),
                postings: HashMap::new(),
                slots: SlotStore::default(),
                stats: CorpusStats::default(),
            },
        }
    }

    pub fn add(&mut self, doc: ProcedureDoc) -> Result<(), IndexError> {
        let h = &mut self.handle;
        let report = validate_document(&doc, &h.schema);
        if !report.is_valid() {
            return Err(IndexError::Schema { id: doc.id, report });
        }
        if h.doc_by_id.contains_key(&doc.id) {
            return Err(IndexError::DuplicateId(doc.id));
        }
        let ordinal = h.docs.len() as u32;
        h.doc_by_id.insert(doc.id.clone(), ordinal);
        h.doc_start.push(h.locators.len() as u32);
        for (si, sentence) in doc.sentences.iter().enumerate() {
            let sid = h.locators.len() as u32;
            h.locators.push((ordinal, si as u32));
            for tok in &sentence.tokens {
                push_posting(&mut h.postings, Term::word(tok.word.clone()), sid);
                push_posting(&mut h.postings, Term::lower(&tok.word), sid);
                if tok.entity_bio != "O" {
                    push_posting(&mut h.postings, Term::entity(tok.entity_bio.clone()), sid);
                }
            }
            h.stats.tokens += sentence.tokens.len() as u64;
        }
        h.slots.insert(ordinal, &doc.slots);
        h.records.push(to_record_line(&doc));
        h.docs.push(doc);
        Ok(())
    }

    pub fn finish(mut self) -> IndexHandle {
        let h = &mut self.handle;
        h.stats.procedures = h.docs.len() as u64;
        h.stats.sentences = h.locators.len() as u64;
        h.stats.terms = h.postings.len() as u64;
        h.stats.postings = h.postings.values().map(|p| p.len() as u64).sum();
        self.handle
    }
}

fn push_posting(postings: &mut HashMap<Term, Vec<u32>>, term: Term, sid: u32) {
    let list = postings.entry(term).or_default();
    if list.last() != Some(&sid) {
        list.push(sid);
    }
}

impl IndexHandle {
    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn stats(&self) -> CorpusStats {
        self.stats
    }

    pub fn num_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn num_sentences(&self) -> usize {
        self.locators.len()
    }

    pub fn docs(&self) -> &[ProcedureDoc] {
        &self.docs
    }

    pub fn doc(&self, ordinal: u32) -> &ProcedureDoc {
        &self.docs[ordinal as usize]
    }

    pub fn doc_ordinal(&self, id: &str) -> Option<u32> {
        self.doc_by_id.get(id).copied()
    }

    /// The stored interchange record of a document.
    pub fn record(&self, id: &str) -> Option<&str> {
        self.doc_ordinal(id).map(|o| self.records[o as usize].as_str())
    }

    pub fn slot_store(&self) -> &SlotStore {
        &self.slots
    }

    pub fn locator(&self, sentence_id: u32) -> SentenceLocator {
        let (doc, idx) = self.locators[sentence_id as usize];
        SentenceLocator {
            sentence_id,
            doc_id: self.docs[doc as usize].id.clone(),
            sentence_index: idx,
        }
    }

    /// `(doc ordinal, sentence index)` of a sentence id.
    pub fn sentence_position(&self, sentence_id: u32) -> (u32, u32) {
        self.locators[sentence_id as usize]
    }

    pub fn sentence(&self, sentence_id: u32) -> &SentenceGraph {
        let (doc, idx) = self.locators[sentence_id as usize];
        &self.docs[doc as usize].sentences[idx as usize]
    }

    /// Sentence ids of a document.
    pub fn doc_sentences(&self, ordinal: u32) -> std::ops::Range<u32> {
        let start = self.doc_start[ordinal as usize];
        start..start + self.docs[ordinal as usize].sentences.len() as u32
    }

    /// Sorted sentence ids containing `term`; empty for unknown terms.
    pub fn postings(&self, term: &Term) -> &[u32] {
        self.postings.get(term).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Sentences containing every term in `terms`.
    pub fn candidate_sentences(&self, terms: &BTreeSet<Term>) -> Result<Vec<u32>, IndexError> {
        if terms.is_empty() {
            return Err(IndexError::EmptyTermSet);
        }
        let lists: Vec<&[u32]> = terms.iter().map(|t| self.postings(t)).collect();
        Ok(intersect_sorted(&lists))
    }

    /// Document ordinals (ascending) passing every filter of `sq`.
    pub fn filter_docs_by_slots(&self, sq: &SlotQuery, mode: SlotMatchMode) -> Vec<u32> {
        let mut filters = sq.filters.iter();
        let Some((first_slot, first_filter)) = filters.next() else {
            return (0..self.docs.len() as u32).collect();
        };
        let passes = |doc: u32, slot: &str, filter: &SlotFilter| {
            !self.slots.matching_values(slot, doc, filter, mode).is_empty()
        };
        let mut out: Vec<u32> = self
            .slots
            .docs_with(first_slot)
            .filter(|&d| passes(d, first_slot, first_filter))
            .collect();
        for (slot, filter) in filters {
            out.retain(|&d| passes(d, slot, filter));
        }
        out
    }

    pub(crate) fn term_iter(&self) -> impl Iterator<Item = (&Term, &Vec<u32>)> {
        self.postings.iter()
    }
}

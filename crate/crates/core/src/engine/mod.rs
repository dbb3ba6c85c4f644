//! Query execution: candidate retrieval from postings, then per-sentence
//! verification.

mod aggregate;
mod oracle;
mod program;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use aggregate::{aggregate_answers, normalize_answer, sample_for_review, AnswerCount, AnswerTable};
pub use oracle::brute_force_search;
pub use program::{compile, Inst, MatchProgram, SentenceMatch, TokenTest};

use crate::index::{IndexError, IndexHandle, SentenceLocator, SlotMatchMode};
use crate::query::{required_terms, CasePolicy, GraphQuery, SlotQuery};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("request has neither a graph query nor a slot query")]
    NoQuery,
    #[error("page offset {offset} is past the {total} available matches")]
    PageOutOfRange { offset: usize, total: usize },
    #[error("unknown capture {0:?}")]
    UnknownCapture(String),
    #[error(transparent)]
    Index(#[from] IndexError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Page {
    pub offset: usize,
    /// `None` returns everything from `offset` on.
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SearchRequest {
    pub graph: Option<GraphQuery>,
    pub slots: Option<SlotQuery>,
    pub page: Page,
}

impl SearchRequest {
    fn effective_slots(&self) -> Option<&SlotQuery> {
        self.slots.as_ref().filter(|s| !s.filters.is_empty())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchOptions {
    pub case: CasePolicy,
    pub slot_match: SlotMatchMode,
    pub parallel: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            case: CasePolicy::default(),
            slot_match: SlotMatchMode::Substring,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Capture {
    /// Token range for graph captures; slot answers have none.
    pub span: Option<(u32, u32)>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Match {
    pub doc_ordinal: u32,
    pub doc_id: String,
    /// Set for graph matches.
    pub sentence: Option<SentenceLocator>,
    pub text: Option<String>,
    pub span: Option<(u32, u32)>,
    pub captures: BTreeMap<String, Capture>,
}

impl Match {
    fn sentence_id(&self) -> Option<u32> {
        self.sentence.as_ref().map(|l| l.sentence_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchResponse {
    pub matches: Vec<Match>,
    /// Match count before paging.
    pub total: usize,
    pub page: Page,
    /// Captures the request could produce, in query order.
    pub capture_names: Vec<String>,
}

/// Deduplicates on (sentence or document, captures), keeping the smallest
/// span, and orders by document, sentence, span start, then captures.
pub(crate) fn finalize(mut matches: Vec<Match>) -> Vec<Match> {
    matches.sort_by(|a, b| {
        (a.doc_ordinal, a.sentence_id(), &a.captures, a.span)
            .cmp(&(b.doc_ordinal, b.sentence_id(), &b.captures, b.span))
    });
    matches.dedup_by(|later, kept| {
        (later.doc_ordinal, later.sentence_id(), &later.captures)
            == (kept.doc_ordinal, kept.sentence_id(), &kept.captures)
    });
    matches.sort_by(|a, b| {
        (a.doc_ordinal, a.sentence_id(), a.span.map(|s| s.0), &a.captures)
            .cmp(&(b.doc_ordinal, b.sentence_id(), b.span.map(|s| s.0), &b.captures))
    });
    matches
}

pub(crate) fn paginate(mut matches: Vec<Match>, page: Page, capture_names: Vec<String>) -> Result<SearchResponse, EngineError> {
    let total = matches.len();
    if page.offset > total {
        return Err(EngineError::PageOutOfRange {
            offset: page.offset,
            total,
        });
    }
    matches.drain(..page.offset);
    if let Some(limit) = page.limit {
        matches.truncate(limit);
    }
    Ok(SearchResponse {
        matches,
        total,
        page,
        capture_names,
    })
}

pub(crate) fn request_capture_names(req: &SearchRequest) -> Vec<String> {
    match (&req.graph, req.effective_slots()) {
        (Some(g), _) => g.capture_names(),
        (None, Some(s)) => s.slot_names(),
        (None, None) => Vec::new(),
    }
}

pub fn search(h: &IndexHandle, req: &SearchRequest, opts: &SearchOptions) -> Result<SearchResponse, EngineError> {
    let slots = req.effective_slots();
    let matches = match (&req.graph, slots) {
        (None, None) => return Err(EngineError::NoQuery),
        (Some(g), slots) => {
            let allowed = slots.map(|sq| h.filter_docs_by_slots(sq, opts.slot_match));
            graph_matches(h, g, allowed.as_deref(), opts)?
        }
        (None, Some(sq)) => slot_matches(h, sq, opts),
    };
    paginate(finalize(matches), req.page, request_capture_names(req))
}

fn graph_matches(
    h: &IndexHandle,
    q: &GraphQuery,
    allowed_docs: Option<&[u32]>,
    opts: &SearchOptions,
) -> Result<Vec<Match>, EngineError> {
    let mut candidates = h.candidate_sentences(&required_terms(q, &opts.case))?;
    if let Some(allowed) = allowed_docs {
        candidates.retain(|&sid| allowed.binary_search(&h.sentence_position(sid).0).is_ok());
    }
    let prog = compile(q, &opts.case);
    let verify = |&sid: &u32| -> Vec<Match> {
        let sentence = h.sentence(sid);
        let found = prog.match_sentence(sentence);
        if found.is_empty() {
            return Vec::new();
        }
        let (doc_ordinal, _) = h.sentence_position(sid);
        let locator = h.locator(sid);
        let text = sentence.text();
        found
            .into_iter()
            .map(|m| Match {
                doc_ordinal,
                doc_id: locator.doc_id.clone(),
                sentence: Some(locator.clone()),
                text: Some(text.clone()),
                span: Some(m.span),
                captures: m
                    .captures
                    .into_iter()
                    .map(|(name, (s, e))| {
                        let text = sentence.span_text(s as usize..e as usize);
                        (name, Capture { span: Some((s, e)), text })
                    })
                    .collect(),
            })
            .collect()
    };
    let per_sentence: Vec<Vec<Match>> = if opts.parallel {
        candidates.par_iter().map(verify).collect()
    } else {
        candidates.iter().map(verify).collect()
    };
    Ok(per_sentence.into_iter().flatten().collect())
}

/// One match per combination of matching values across the filtered slots.
fn slot_matches(h: &IndexHandle, sq: &SlotQuery, opts: &SearchOptions) -> Vec<Match> {
    let store = h.slot_store();
    let mut out = Vec::new();
    for doc in h.filter_docs_by_slots(sq, opts.slot_match) {
        let per_slot: Vec<(&String, Vec<&str>)> = sq
            .filters
            .iter()
            .map(|(slot, filter)| {
                let mut values = store.matching_values(slot, doc, filter, opts.slot_match);
                values.sort_unstable();
                values.dedup();
                (slot, values)
            })
            .collect();
        let doc_id = &h.doc(doc).id;
        for combo in cartesian(&per_slot) {
            out.push(Match {
                doc_ordinal: doc,
                doc_id: doc_id.clone(),
                sentence: None,
                text: None,
                span: None,
                captures: combo,
            });
        }
    }
    out
}

fn cartesian(per_slot: &[(&String, Vec<&str>)]) -> Vec<BTreeMap<String, Capture>> {
    let mut acc = vec![BTreeMap::new()];
    for (slot, values) in per_slot {
        let mut next = Vec::with_capacity(acc.len() * values.len());
        for partial in &acc {
            for v in values {
                let mut m: BTreeMap<String, Capture> = partial.clone();
                m.insert(
                    (*slot).clone(),
                    Capture {
                        span: None,
                        text: (*v).to_string(),
                    },
                );
                next.push(m);
            }
        }
        acc = next;
    }
    acc
}

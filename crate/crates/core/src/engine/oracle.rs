//! Reference evaluator: scans every sentence of every document, interpreting
//! the query tree directly. Shares no code with the indexed path beyond the
//! data types, and exists to check it.

use std::collections::{BTreeMap, BTreeSet};

use super::{paginate, request_capture_names, Capture, EngineError, Match, SearchOptions, SearchRequest};
use crate::corpus::{Direction, ProcedureDoc, SentenceGraph};
use crate::index::{SentenceLocator, SlotMatchMode};
use crate::query::{Attribute, PatternElem, Quantifier, SlotFilter, SlotQuery, TokenConstraint};

pub fn brute_force_search(
    docs: &[ProcedureDoc],
    req: &SearchRequest,
    opts: &SearchOptions,
) -> Result<super::SearchResponse, EngineError> {
    let slots = req.slots.as_ref().filter(|s| !s.filters.is_empty());
    if req.graph.is_none() && slots.is_none() {
        return Err(EngineError::NoQuery);
    }
    // (doc, sentence, captures) -> smallest span; slot answers use sentence None
    let mut found: BTreeMap<(u32, Option<u32>, BTreeMap<String, Capture>), Option<(u32, u32)>> = BTreeMap::new();
    let mut sentence_id = 0u32;
    for (ordinal, doc) in docs.iter().enumerate() {
        let ordinal = ordinal as u32;
        let first_sentence = sentence_id;
        sentence_id += doc.sentences.len() as u32;
        let tuples = match slots {
            Some(sq) => match slot_tuples(doc, sq, opts.slot_match) {
                Some(t) => t,
                None => continue,
            },
            None => Vec::new(),
        };
        let Some(graph) = &req.graph else {
            for t in tuples {
                found.insert((ordinal, None, t), None);
            }
            continue;
        };
        for (i, sentence) in doc.sentences.iter().enumerate() {
            let ctx = Ctx {
                s: sentence,
                opts,
            };
            for start in 0..=sentence.tokens.len() {
                ctx.elems(graph.elems(), start, start, St::default(), &mut |_, st| {
                    let (Some(lo), Some(hi)) = (st.touched.first(), st.touched.last()) else {
                        return;
                    };
                    let span = (*lo as u32, *hi as u32 + 1);
                    let captures = st
                        .caps
                        .iter()
                        .map(|(name, &(s, e))| {
                            let text = sentence.tokens[s..e].iter().map(|t| t.word.as_str()).collect::<Vec<_>>().join(" ");
                            (name.clone(), Capture { span: Some((s as u32, e as u32)), text })
                        })
                        .collect();
                    let key = (ordinal, Some(first_sentence + i as u32), captures);
                    let slot = found.entry(key).or_insert(Some(span));
                    if Some(span) < *slot {
                        *slot = Some(span);
                    }
                });
            }
        }
    }
    let mut matches: Vec<Match> = found
        .into_iter()
        .map(|((ordinal, sid, captures), span)| {
            let doc = &docs[ordinal as usize];
            let (sentence, text) = match sid {
                Some(sid) => {
                    let first: u32 = docs[..ordinal as usize].iter().map(|d| d.sentences.len() as u32).sum();
                    let idx = sid - first;
                    let s = &doc.sentences[idx as usize];
                    let text = s.tokens.iter().map(|t| t.word.as_str()).collect::<Vec<_>>().join(" ");
                    (
                        Some(SentenceLocator {
                            sentence_id: sid,
                            doc_id: doc.id.clone(),
                            sentence_index: idx,
                        }),
                        Some(text),
                    )
                }
                None => (None, None),
            };
            Match {
                doc_ordinal: ordinal,
                doc_id: doc.id.clone(),
                sentence,
                text,
                span,
                captures,
            }
        })
        .collect();
    matches.sort_by(|a, b| {
        let key = |m: &Match| (m.doc_ordinal, m.sentence.as_ref().map(|l| l.sentence_id), m.span.map(|s| s.0));
        key(a).cmp(&key(b)).then_with(|| a.captures.cmp(&b.captures))
    });
    paginate(matches, req.page, request_capture_names(req))
}

/// `None` when some filter has no matching value in `doc`.
fn slot_tuples(doc: &ProcedureDoc, sq: &SlotQuery, mode: SlotMatchMode) -> Option<Vec<BTreeMap<String, Capture>>> {
    let mut tuples = vec![BTreeMap::new()];
    for (slot, filter) in &sq.filters {
        let values: BTreeSet<&String> = doc
            .slots
            .get(slot)
            .into_iter()
            .flatten()
            .filter(|v| match filter {
                SlotFilter::AnyValue => true,
                SlotFilter::Keywords(kws) => kws.iter().any(|k| {
                    let (k, v) = (k.to_lowercase(), v.to_lowercase());
                    match mode {
                        SlotMatchMode::Substring => v.contains(&k),
                        SlotMatchMode::Exact => v == k,
                    }
                }),
            })
            .collect();
        if values.is_empty() {
            return None;
        }
        tuples = tuples
            .into_iter()
            .flat_map(|t| {
                values.iter().map(move |v| {
                    let mut t = t.clone();
                    t.insert(slot.clone(), Capture { span: None, text: (*v).clone() });
                    t
                })
            })
            .collect();
    }
    Some(tuples)
}

#[derive(Clone, Default)]
struct St {
    touched: BTreeSet<usize>,
    caps: BTreeMap<String, (usize, usize)>,
}

struct Ctx<'a> {
    s: &'a SentenceGraph,
    opts: &'a SearchOptions,
}

impl Ctx<'_> {
    fn word_eq(&self, pos: usize, want: &str, fold: bool) -> bool {
        let have = &self.s.tokens[pos].word;
        if fold {
            have.to_lowercase() == want.to_lowercase()
        } else {
            have == want
        }
    }

    fn satisfies(&self, c: &TokenConstraint, pos: usize) -> bool {
        if pos >= self.s.tokens.len() {
            return false;
        }
        c.alternatives.is_empty()
            || c.alternatives.iter().any(|(attr, v)| match attr {
                Attribute::Word => self.word_eq(pos, v, self.opts.case.bracket_case_insensitive),
                Attribute::Entity => self.s.tokens[pos].entity_bio == *v,
            })
    }

    /// Mention-start positions reached over `label` edges from mentions
    /// starting in `from..to`.
    fn hop(&self, from: usize, to: usize, label: &str, dir: Direction) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for e in &self.s.edges {
            if e.label != label {
                continue;
            }
            let (near, far) = match dir {
                Direction::Outgoing => (e.head, e.tail),
                Direction::Incoming => (e.tail, e.head),
            };
            let (Some(near), Some(far)) = (self.s.mentions.get(near), self.s.mentions.get(far)) else {
                continue;
            };
            if from <= near.start && near.start < to {
                out.insert(far.start);
            }
        }
        out
    }

    /// Matches `elems` from `pos`, calling `k` with the end position and
    /// state for each way to do so. `seg` is where the current run of token
    /// elements began; a traversal leaves from `seg..pos`.
    fn elems(&self, elems: &[PatternElem], pos: usize, seg: usize, st: St, k: &mut dyn FnMut(usize, St)) {
        let Some((first, rest)) = elems.split_first() else {
            k(pos, st);
            return;
        };
        match first {
            PatternElem::Literal(w) => {
                if pos < self.s.tokens.len() && self.word_eq(pos, w, self.opts.case.literal_case_insensitive) {
                    let mut st = st;
                    st.touched.insert(pos);
                    self.elems(rest, pos + 1, seg, st, k);
                }
            }
            PatternElem::Constraint(c, q) => {
                let room = self.s.tokens.len().saturating_sub(pos);
                let hi = match q {
                    Quantifier::One => room.min(1),
                    Quantifier::Star | Quantifier::Plus => room,
                    Quantifier::Range(_, m) => (*m as usize).min(room),
                };
                let lo = match q {
                    Quantifier::One | Quantifier::Plus => 1,
                    Quantifier::Star => 0,
                    Quantifier::Range(m, _) => *m as usize,
                };
                let counts: Vec<usize> = if c.alternatives.is_empty() {
                    (lo..=hi).collect()
                } else {
                    let mut run = 0;
                    while run < hi && self.satisfies(c, pos + run) {
                        run += 1;
                    }
                    if run >= lo {
                        vec![run]
                    } else {
                        vec![]
                    }
                };
                for n in counts {
                    let mut st = st.clone();
                    st.touched.extend(pos..pos + n);
                    self.elems(rest, pos + n, seg, st, k);
                }
            }
            PatternElem::Capture { name, elems: inner } => {
                self.elems(inner, pos, seg, st, &mut |end, mut st: St| {
                    st.caps.insert(name.clone(), (pos, end));
                    self.elems(rest, end, seg, st, k);
                });
            }
            PatternElem::Traversal { direction, label } => {
                for target in self.hop(seg, pos, label, *direction) {
                    self.elems(rest, target, target, st.clone(), k);
                }
            }
        }
    }
}

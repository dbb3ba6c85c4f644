//! The ten benchmark queries, a corpus-driven random query generator, and
//! a check that indexed search and the brute-force scan agree.

use serde::Serialize;

use crate::corpus::{Direction, ProcedureDoc, SentenceGraph};
use crate::engine::{aggregate_answers, brute_force_search, search, EngineError, SearchOptions, SearchRequest};
use crate::index::IndexHandle;
use crate::ingest::SplitMix64;
use crate::query::{
    parse_graph_query, parse_slot_query, render_query, Attribute, GraphQuery, PatternElem, QueryError, Quantifier,
    SlotFilter, SlotQuery, TokenConstraint,
};
use crate::schema::Schema;
use crate::wire::WireSearchResponse;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchmarkQuery {
    pub id: &'static str,
    pub slots: &'static [(&'static str, &'static str)],
    pub graph: Option<&'static str>,
    /// Capture whose answers are counted.
    pub target: &'static str,
}

pub const BENCHMARK: [BenchmarkQuery; 10] = [
    BenchmarkQuery {
        id: "Q1",
        slots: &[("reagent", "triphosgene"), ("solvent", "?")],
        graph: None,
        target: "solvent",
    },
    BenchmarkQuery {
        id: "Q2",
        slots: &[("product", "(5-Methylpyrimidin-2-yl)methanol"), ("yield_percent", "?")],
        graph: None,
        target: "yield_percent",
    },
    BenchmarkQuery {
        id: "Q3",
        slots: &[("reagent", "trimethylsilyldiazomethane"), ("product", "?")],
        graph: None,
        target: "product",
    },
    BenchmarkQuery {
        id: "Q4",
        slots: &[("reagent", "chlorosulfonic acid"), ("solvent", "chlorobenzene"), ("product", "?")],
        graph: None,
        target: "product",
    },
    BenchmarkQuery {
        id: "Q5",
        slots: &[("reagent", "CDI OR carbonyldiimidazole"), ("reaction_time", "?")],
        graph: None,
        target: "reaction_time",
    },
    BenchmarkQuery {
        id: "Q6",
        slots: &[("reagent", "trifluoromethanesulfonic acid"), ("temperature", "?")],
        graph: None,
        target: "temperature",
    },
    BenchmarkQuery {
        id: "Q7",
        slots: &[],
        graph: Some("plasma <acts-on diluted >using (?<reagent> [entity=B-Reagent][entity=I-Reagent]*)"),
        target: "reagent",
    },
    BenchmarkQuery {
        id: "Q8",
        slots: &[],
        graph: Some("(?<ph> [entity=B-pH][entity=I-pH]+) <setting titrated >using NaOH"),
        target: "ph",
    },
    BenchmarkQuery {
        id: "Q9",
        slots: &[],
        graph: Some("PTFE filter >measure (?<pore_size> [entity=B-Generic-Measure][entity=I-Generic-Measure]*)"),
        target: "pore_size",
    },
    BenchmarkQuery {
        id: "Q10",
        slots: &[],
        graph: Some(
            "HATU >measure (?<mole> [] [word=mmol|word=mol]) []{1,10} DMF >measure (?<volume> [] [word=ml|word=l])",
        ),
        target: "mole",
    },
];

impl BenchmarkQuery {
    pub fn request(&self, schema: &Schema) -> Result<SearchRequest, QueryError> {
        let graph = self.graph.map(|g| parse_graph_query(g, schema)).transpose()?;
        let slots = if self.slots.is_empty() {
            None
        } else {
            Some(parse_slot_query(self.slots.iter().copied(), schema)?)
        };
        Ok(SearchRequest {
            graph,
            slots,
            page: Default::default(),
        })
    }

    pub fn describe(&self) -> String {
        let slots: Vec<String> = self.slots.iter().map(|(k, v)| format!("{k}={v}")).collect();
        match self.graph {
            Some(g) if slots.is_empty() => g.to_string(),
            Some(g) => format!("{g} | {}", slots.join(", ")),
            None => slots.join(", "),
        }
    }
}

/// Random queries built from what actually occurs in `docs`, so that most
/// of them match something. Deterministic in `seed`.
pub fn random_queries(docs: &[ProcedureDoc], seed: u64, n: usize) -> Vec<(String, SearchRequest)> {
    let mut rng = SplitMix64::new(seed);
    let mut out = Vec::with_capacity(n);
    if docs.iter().all(|d| d.sentences.iter().all(SentenceGraph::is_empty)) {
        return out;
    }
    while out.len() < n {
        let doc = rng.pick(docs);
        let Some(s) = pick_sentence(&mut rng, doc) else { continue };
        let shape = rng.below(8);
        let graph = match shape {
            5 => None,
            _ => graph_pattern(&mut rng, s, shape),
        };
        let slots = match shape {
            5 | 6 => slot_pattern(&mut rng, doc),
            _ => None,
        };
        if graph.is_none() && slots.is_none() {
            continue;
        }
        let mut label = graph.as_ref().map(render_query).unwrap_or_default();
        if let Some(sq) = &slots {
            let parts: Vec<String> = sq
                .filters
                .iter()
                .map(|(k, f)| match f {
                    SlotFilter::AnyValue => format!("{k}=?"),
                    SlotFilter::Keywords(kw) => format!("{k}={}", kw.join(" OR ")),
                })
                .collect();
            if !label.is_empty() {
                label.push_str(" | ");
            }
            label.push_str(&parts.join(", "));
        }
        out.push((
            label,
            SearchRequest {
                graph,
                slots,
                page: Default::default(),
            },
        ));
    }
    out
}

fn pick_sentence<'a>(rng: &mut SplitMix64, doc: &'a ProcedureDoc) -> Option<&'a SentenceGraph> {
    if doc.sentences.is_empty() {
        return None;
    }
    let s = rng.pick(&doc.sentences);
    (!s.is_empty()).then_some(s)
}

fn mention_pattern(s: &SentenceGraph, mention: usize, name: &str) -> PatternElem {
    let label = &s.mentions[mention].label;
    let rest = if s.mentions[mention].end - s.mentions[mention].start > 1 {
        Quantifier::Plus
    } else {
        Quantifier::Star
    };
    PatternElem::Capture {
        name: name.into(),
        elems: vec![
            PatternElem::Constraint(
                TokenConstraint {
                    alternatives: vec![(Attribute::Entity, format!("B-{label}"))],
                },
                Quantifier::One,
            ),
            PatternElem::Constraint(
                TokenConstraint {
                    alternatives: vec![(Attribute::Entity, format!("I-{label}"))],
                },
                rest,
            ),
        ],
    }
}

fn word(s: &SentenceGraph, i: usize) -> PatternElem {
    PatternElem::Literal(s.tokens[i].word.clone())
}

fn capture(name: &str, elems: Vec<PatternElem>) -> PatternElem {
    PatternElem::Capture {
        name: name.into(),
        elems,
    }
}

fn graph_pattern(rng: &mut SplitMix64, s: &SentenceGraph, shape: usize) -> Option<GraphQuery> {
    let len = s.len();
    let i = rng.below(len);
    let elems = match shape {
        0 => vec![capture("x", vec![word(s, i)])],
        1 if !s.mentions.is_empty() => {
            let m = rng.below(s.mentions.len());
            vec![mention_pattern(s, m, "m")]
        }
        2 | 6 if !s.edges.is_empty() => {
            let e = rng.pick(&s.edges);
            let (from, to, direction) = if rng.below(2) == 0 {
                (e.head, e.tail, Direction::Outgoing)
            } else {
                (e.tail, e.head, Direction::Incoming)
            };
            vec![
                word(s, s.mentions[from].start),
                PatternElem::Traversal {
                    direction,
                    label: e.label.clone(),
                },
                mention_pattern(s, to, "target"),
            ]
        }
        3 => {
            let j = rng.below(len);
            let (a, b) = (i.min(j), i.max(j));
            let gap = (b - a).saturating_sub(1) as u32;
            let max = gap + rng.below(3) as u32;
            let min = gap.saturating_sub(rng.below(2) as u32);
            vec![
                word(s, a),
                PatternElem::Constraint(TokenConstraint::wildcard(), Quantifier::Range(min, max)),
                capture("y", vec![word(s, b)]),
            ]
        }
        4 => {
            let j = rng.below(len);
            vec![
                word(s, i),
                capture(
                    "z",
                    vec![PatternElem::Constraint(
                        TokenConstraint {
                            alternatives: vec![
                                (Attribute::Word, s.tokens[j].word.clone()),
                                (Attribute::Entity, s.tokens[j].entity_bio.clone()),
                            ],
                        },
                        Quantifier::One,
                    )],
                ),
            ]
        }
        7 => {
            let upper = s.tokens[i].word.to_uppercase();
            vec![PatternElem::Literal(upper), PatternElem::Constraint(TokenConstraint::wildcard(), Quantifier::Star)]
        }
        _ => vec![word(s, i)],
    };
    GraphQuery::new(elems).ok()
}

fn slot_pattern(rng: &mut SplitMix64, doc: &ProcedureDoc) -> Option<SlotQuery> {
    let names: Vec<&String> = doc.slots.iter().filter(|(_, v)| !v.is_empty()).map(|(k, _)| k).collect();
    if names.is_empty() {
        return None;
    }
    let mut sq = SlotQuery { filters: Default::default() };
    for _ in 0..1 + rng.below(2) {
        let name = *rng.pick(&names);
        let filter = if rng.below(3) == 0 {
            SlotFilter::AnyValue
        } else {
            let value = rng.pick(&doc.slots[name]);
            let chars: Vec<char> = value.chars().collect();
            let start = rng.below(chars.len());
            let end = (start + 3 + rng.below(6)).min(chars.len());
            let keyword: String = chars[start..end].iter().collect::<String>().trim().to_string();
            if keyword.is_empty() {
                SlotFilter::AnyValue
            } else {
                SlotFilter::Keywords(vec![keyword])
            }
        };
        sq.filters.insert(name.clone(), filter);
    }
    Some(sq)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RegressionRow {
    pub id: String,
    pub query: String,
    /// Procedures contributing an answer.
    pub procedures: usize,
    /// Distinct normalized answers.
    pub answers: usize,
    pub matches: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Divergence {
    pub id: String,
    pub query: String,
    pub indexed: String,
    pub oracle: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RegressionReport {
    pub rows: Vec<RegressionRow>,
    pub random_checked: usize,
    pub divergences: Vec<Divergence>,
}

impl RegressionReport {
    pub fn passed(&self) -> bool {
        self.divergences.is_empty()
    }
}

fn compare(
    h: &IndexHandle,
    docs: &[ProcedureDoc],
    id: &str,
    query: &str,
    req: &SearchRequest,
    opts: &SearchOptions,
    report: &mut RegressionReport,
) -> Result<crate::engine::SearchResponse, EngineError> {
    let indexed = search(h, req, opts)?;
    let oracle = brute_force_search(docs, req, opts)?;
    let a = serde_json::to_string(&WireSearchResponse::from(&indexed)).expect("serializable");
    let b = serde_json::to_string(&WireSearchResponse::from(&oracle)).expect("serializable");
    if a != b {
        report.divergences.push(Divergence {
            id: id.to_string(),
            query: query.to_string(),
            indexed: a,
            oracle: b,
        });
    }
    Ok(indexed)
}

/// Runs the benchmark queries and `random` generated ones through both
/// evaluators and records every difference in serialized output.
pub fn run_regression(
    h: &IndexHandle,
    docs: &[ProcedureDoc],
    random: usize,
    seed: u64,
    opts: &SearchOptions,
) -> Result<RegressionReport, RegressionError> {
    let mut report = RegressionReport::default();
    for q in &BENCHMARK {
        let req = q.request(h.schema())?;
        let resp = compare(h, docs, q.id, &q.describe(), &req, opts, &mut report)?;
        let table = aggregate_answers(&resp, q.target)?;
        report.rows.push(RegressionRow {
            id: q.id.to_string(),
            query: q.describe(),
            procedures: table.procedures,
            answers: table.distinct,
            matches: resp.total,
        });
    }
    for (i, (label, req)) in random_queries(docs, seed, random).into_iter().enumerate() {
        compare(h, docs, &format!("R{i}"), &label, &req, opts, &mut report)?;
        report.random_checked += 1;
    }
    Ok(report)
}

#[derive(Debug, thiserror::Error)]
pub enum RegressionError {
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

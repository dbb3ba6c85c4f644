//! JSON shapes shared by the HTTP API and the command line.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::engine::{AnswerCount, AnswerTable, Match, Page, SearchRequest, SearchResponse};
use crate::query::{parse_graph_query, parse_slot_query, QueryError};
use crate::schema::Schema;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchBody {
    #[serde(default)]
    pub graph_query: Option<String>,
    #[serde(default)]
    pub slot_query: Option<BTreeMap<String, String>>,
    #[serde(default)]
    pub page: Option<PageBody>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PageBody {
    #[serde(default)]
    pub offset: usize,
    #[serde(default)]
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AggregateBody {
    #[serde(default)]
    pub graph_query: Option<String>,
    #[serde(default)]
    pub slot_query: Option<BTreeMap<String, String>>,
    pub capture: String,
    #[serde(default)]
    pub sample_k: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// Parses the query parts of a request. Paging is left at the default.
pub fn compile_request(
    graph_query: Option<&str>,
    slot_query: Option<&BTreeMap<String, String>>,
    schema: &Schema,
) -> Result<SearchRequest, QueryError> {
    let graph = graph_query.map(|g| parse_graph_query(g, schema)).transpose()?;
    let slots = slot_query.map(|s| parse_slot_query(s, schema)).transpose()?;
    Ok(SearchRequest {
        graph,
        slots,
        page: Page::default(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireCapture {
    pub span: Option<[u32; 2]>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireMatch {
    pub doc_id: String,
    pub sentence_index: Option<u32>,
    pub text: Option<String>,
    pub span: Option<[u32; 2]>,
    pub captures: BTreeMap<String, WireCapture>,
}

impl From<&Match> for WireMatch {
    fn from(m: &Match) -> Self {
        WireMatch {
            doc_id: m.doc_id.clone(),
            sentence_index: m.sentence.as_ref().map(|l| l.sentence_index),
            text: m.text.clone(),
            span: m.span.map(|(s, e)| [s, e]),
            captures: m
                .captures
                .iter()
                .map(|(k, c)| {
                    (
                        k.clone(),
                        WireCapture {
                            span: c.span.map(|(s, e)| [s, e]),
                            text: c.text.clone(),
                        },
                    )
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WirePage {
    pub offset: usize,
    pub limit: Option<usize>,
    pub returned: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireSearchResponse {
    pub total: usize,
    pub matches: Vec<WireMatch>,
    pub page: WirePage,
}

impl From<&SearchResponse> for WireSearchResponse {
    fn from(r: &SearchResponse) -> Self {
        WireSearchResponse {
            total: r.total,
            matches: r.matches.iter().map(WireMatch::from).collect(),
            page: WirePage {
                offset: r.page.offset,
                limit: r.page.limit,
                returned: r.matches.len(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireAnswerTable {
    pub capture: String,
    pub distinct: usize,
    pub procedures: usize,
    pub matches: usize,
    pub doc_answer_pairs: usize,
    pub answers: Vec<AnswerCount>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample: Option<Vec<AnswerCount>>,
}

impl WireAnswerTable {
    pub fn new(t: &AnswerTable, sample: Option<Vec<AnswerCount>>) -> Self {
        WireAnswerTable {
            capture: t.capture.clone(),
            distinct: t.distinct,
            procedures: t.procedures,
            matches: t.matches,
            doc_answer_pairs: t.doc_answer_pairs,
            answers: t.answers.clone(),
            sample,
        }
    }
}

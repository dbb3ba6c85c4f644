//! Graph query language and slot queries.
//!
//! Grammar (whitespace separates elements; a quantifier must directly
//! follow its closing bracket):
//!
//! ```text
//! query      := elem+
//! elem       := literal | bracket quant? | capture | traversal
//! literal    := bare-word | '"' quoted-string '"'
//! bracket    := "[" ( constraint ( "|" constraint )* )? "]"
//! constraint := ( "word" | "entity" ) "=" value
//! quant      := "*" | "+" | "{" m "," n "}"
//! capture    := "(?<" name ">" elem+ ")"
//! traversal  := ( ">" | "<" ) label
//! ```
//!
//! `[]` is the wildcard. Entity values are full BIO tags (`B-Reagent`).
//! A traversal must follow a token element and be followed by one; it may
//! not appear inside a capture. Every query must contain at least one
//! required term (see [`required_terms`]).

mod parser;
mod slot;

pub use parser::parse_graph_query;
pub use slot::{parse_slot_query, SlotFilter, SlotQuery};

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::corpus::Direction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Attribute {
    Word,
    Entity,
}

impl Attribute {
    pub fn name(self) -> &'static str {
        match self {
            Attribute::Word => "word",
            Attribute::Entity => "entity",
        }
    }
}

/// Bracket contents: OR-ed `(attribute, value)` tests; empty is the wildcard.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TokenConstraint {
    pub alternatives: Vec<(Attribute, String)>,
}

impl TokenConstraint {
    pub fn wildcard() -> Self {
        TokenConstraint { alternatives: Vec::new() }
    }

    pub fn is_wildcard(&self) -> bool {
        self.alternatives.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quantifier {
    One,
    Star,
    Plus,
    Range(u32, u32),
}

impl Quantifier {
    pub fn min(self) -> u32 {
        match self {
            Quantifier::One | Quantifier::Plus => 1,
            Quantifier::Star => 0,
            Quantifier::Range(m, _) => m,
        }
    }

    /// `None` means unbounded.
    pub fn max(self) -> Option<u32> {
        match self {
            Quantifier::One => Some(1),
            Quantifier::Star | Quantifier::Plus => None,
            Quantifier::Range(_, n) => Some(n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PatternElem {
    Literal(String),
    Constraint(TokenConstraint, Quantifier),
    Capture { name: String, elems: Vec<PatternElem> },
    Traversal { direction: Direction, label: String },
}

/// A parsed graph query. Construct through [`parse_graph_query`] or
/// [`GraphQuery::new`], both of which enforce the invariants.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GraphQuery {
    elems: Vec<PatternElem>,
}

impl GraphQuery {
    /// Checks structural invariants (not label membership).
    pub fn new(elems: Vec<PatternElem>) -> Result<Self, QueryError> {
        let q = GraphQuery { elems };
        q.check_structure()?;
        Ok(q)
    }

    pub fn elems(&self) -> &[PatternElem] {
        &self.elems
    }

    /// Capture names in order of appearance.
    pub fn capture_names(&self) -> Vec<String> {
        fn walk(elems: &[PatternElem], out: &mut Vec<String>) {
            for e in elems {
                if let PatternElem::Capture { name, elems } = e {
                    out.push(name.clone());
                    walk(elems, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.elems, &mut out);
        out
    }

    fn check_structure(&self) -> Result<(), QueryError> {
        let fail = |kind| Err(QueryError::new(kind, None));
        if self.elems.is_empty() {
            return fail(QueryErrorKind::Empty);
        }
        let mut names = BTreeSet::new();
        check_elems(&self.elems, true, &mut names)?;
        if required_terms(self, &CasePolicy::default()).is_empty() {
            return fail(QueryErrorKind::NoRequiredTerm);
        }
        Ok(())
    }
}

fn check_elems(elems: &[PatternElem], top: bool, names: &mut BTreeSet<String>) -> Result<(), QueryError> {
    let fail = |kind| Err(QueryError::new(kind, None));
    if elems.is_empty() {
        return fail(QueryErrorKind::EmptyCapture);
    }
    for (i, e) in elems.iter().enumerate() {
        match e {
            PatternElem::Traversal { .. } => {
                if !top {
                    return fail(QueryErrorKind::TraversalInCapture);
                }
                let before = i > 0 && !matches!(elems[i - 1], PatternElem::Traversal { .. });
                let after = matches!(elems.get(i + 1), Some(x) if !matches!(x, PatternElem::Traversal { .. }));
                if !before || !after {
                    return fail(QueryErrorKind::DanglingTraversal);
                }
            }
            PatternElem::Capture { name, elems } => {
                if !names.insert(name.clone()) {
                    return fail(QueryErrorKind::DuplicateCapture(name.clone()));
                }
                check_elems(elems, false, names)?;
            }
            PatternElem::Literal(w) if w.is_empty() => return fail(QueryErrorKind::EmptyValue),
            PatternElem::Constraint(c, q) => {
                if c.alternatives.iter().any(|(_, v)| v.is_empty()) {
                    return fail(QueryErrorKind::EmptyValue);
                }
                if let Quantifier::Range(m, n) = *q {
                    if m > n || n == 0 {
                        return fail(QueryErrorKind::BadRange(m, n));
                    }
                }
            }
            PatternElem::Literal(_) => {}
        }
    }
    Ok(())
}

/// Case sensitivity of word comparisons. Bare literals default to
/// case-insensitive, `[word=...]` to case-sensitive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CasePolicy {
    pub literal_case_insensitive: bool,
    pub bracket_case_insensitive: bool,
}

impl Default for CasePolicy {
    fn default() -> Self {
        CasePolicy {
            literal_case_insensitive: true,
            bracket_case_insensitive: false,
        }
    }
}

/// Which indexed field a term lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TermField {
    /// Token surface form as ingested.
    Word,
    /// Lowercased surface form.
    LowerWord,
    /// Full BIO tag of a token inside a mention.
    Entity,
}

impl TermField {
    pub fn name(self) -> &'static str {
        match self {
            TermField::Word => "word",
            TermField::LowerWord => "lower",
            TermField::Entity => "entity",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "word" => Some(TermField::Word),
            "lower" => Some(TermField::LowerWord),
            "entity" => Some(TermField::Entity),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Term {
    pub field: TermField,
    pub value: String,
}

impl Term {
    pub fn new(field: TermField, value: impl Into<String>) -> Self {
        Term {
            field,
            value: value.into(),
        }
    }

    pub fn word(value: impl Into<String>) -> Self {
        Term::new(TermField::Word, value)
    }

    pub fn entity(value: impl Into<String>) -> Self {
        Term::new(TermField::Entity, value)
    }

    pub fn lower(value: &str) -> Self {
        Term::new(TermField::LowerWord, value.to_lowercase())
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.field.name(), self.value)
    }
}

/// Terms that occur in every sentence the query can match.
///
/// Literals contribute their word; a single-alternative bracket with a
/// minimum count of at least one contributes its term. Wildcards,
/// alternations, optional brackets and traversals contribute nothing.
/// `entity=O` is never indexed and so never required.
pub fn required_terms(q: &GraphQuery, case: &CasePolicy) -> BTreeSet<Term> {
    fn walk(elems: &[PatternElem], case: &CasePolicy, out: &mut BTreeSet<Term>) {
        for e in elems {
            match e {
                PatternElem::Literal(w) => {
                    out.insert(if case.literal_case_insensitive { Term::lower(w) } else { Term::word(w.clone()) });
                }
                PatternElem::Constraint(c, q) if q.min() >= 1 && c.alternatives.len() == 1 => {
                    let (attr, value) = &c.alternatives[0];
                    match attr {
                        Attribute::Word if case.bracket_case_insensitive => {
                            out.insert(Term::lower(value));
                        }
                        Attribute::Word => {
                            out.insert(Term::word(value.clone()));
                        }
                        Attribute::Entity if value != "O" => {
                            out.insert(Term::entity(value.clone()));
                        }
                        Attribute::Entity => {}
                    }
                }
                PatternElem::Capture { elems, .. } => walk(elems, case, out),
                _ => {}
            }
        }
    }
    let mut out = BTreeSet::new();
    walk(&q.elems, case, &mut out);
    out
}

/// Canonical text form; parses back to an equal query.
pub fn render_query(q: &GraphQuery) -> String {
    let mut out = String::new();
    render_elems(&q.elems, &mut out);
    out
}

fn render_elems(elems: &[PatternElem], out: &mut String) {
    for (i, e) in elems.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        match e {
            PatternElem::Literal(w) => render_word(w, parser::is_bare_literal(w), out),
            PatternElem::Constraint(c, q) => {
                out.push('[');
                for (j, (attr, value)) in c.alternatives.iter().enumerate() {
                    if j > 0 {
                        out.push('|');
                    }
                    out.push_str(attr.name());
                    out.push('=');
                    render_word(value, parser::is_bare_value(value), out);
                }
                out.push(']');
                match q {
                    Quantifier::One => {}
                    Quantifier::Star => out.push('*'),
                    Quantifier::Plus => out.push('+'),
                    Quantifier::Range(m, n) => out.push_str(&format!("{{{m},{n}}}")),
                }
            }
            PatternElem::Capture { name, elems } => {
                out.push_str("(?<");
                out.push_str(name);
                out.push_str("> ");
                render_elems(elems, out);
                out.push(')');
            }
            PatternElem::Traversal { direction, label } => {
                out.push(match direction {
                    Direction::Outgoing => '>',
                    Direction::Incoming => '<',
                });
                out.push_str(label);
            }
        }
    }
}

fn render_word(w: &str, bare: bool, out: &mut String) {
    if bare {
        out.push_str(w);
        return;
    }
    out.push('"');
    for c in w.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QueryErrorKind {
    Syntax { expected: String },
    UnknownLabel(String),
    UnknownEdgeLabel(String),
    UnknownSlot(String),
    DuplicateCapture(String),
    EmptyValue,
    EmptyKeyword(String),
    BadRange(u32, u32),
    Empty,
    EmptyCapture,
    DanglingTraversal,
    TraversalInCapture,
    NoRequiredTerm,
}

impl fmt::Display for QueryErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QueryErrorKind::Syntax { expected } => write!(f, "syntax error: expected {expected}"),
            QueryErrorKind::UnknownLabel(l) => write!(f, "unknown entity label {l:?}"),
            QueryErrorKind::UnknownEdgeLabel(l) => write!(f, "unknown edge label {l:?}"),
            QueryErrorKind::UnknownSlot(s) => write!(f, "unknown slot {s:?}"),
            QueryErrorKind::DuplicateCapture(n) => write!(f, "duplicate capture name {n:?}"),
            QueryErrorKind::EmptyValue => f.write_str("empty constraint value"),
            QueryErrorKind::EmptyKeyword(s) => write!(f, "empty keyword in slot {s:?}"),
            QueryErrorKind::BadRange(m, n) => write!(f, "invalid repetition range {{{m},{n}}}"),
            QueryErrorKind::Empty => f.write_str("empty query"),
            QueryErrorKind::EmptyCapture => f.write_str("empty capture group"),
            QueryErrorKind::DanglingTraversal => {
                f.write_str("a traversal must sit between two token patterns")
            }
            QueryErrorKind::TraversalInCapture => f.write_str("traversals are not allowed inside captures"),
            QueryErrorKind::NoRequiredTerm => {
                f.write_str("query has no required term (needs a literal or a single non-optional constraint)")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct QueryError {
    pub kind: QueryErrorKind,
    /// Byte offset into the query text, when known.
    pub position: Option<usize>,
}

impl QueryError {
    pub fn new(kind: QueryErrorKind, position: Option<usize>) -> Self {
        QueryError { kind, position }
    }

    pub fn at(kind: QueryErrorKind, position: usize) -> Self {
        QueryError::new(kind, Some(position))
    }
}

impl fmt::Display for QueryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.position {
            Some(p) => write!(f, "{} at byte {p}", self.kind),
            None => write!(f, "{}", self.kind),
        }
    }
}

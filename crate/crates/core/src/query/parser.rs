use std::collections::BTreeSet;

use super::{Attribute, Direction, GraphQuery, PatternElem, Quantifier, QueryError, QueryErrorKind, TokenConstraint};
use crate::schema::{BioTag, Schema};

const SPECIAL: &str = "[]()<>{}|\"\\*+=";

fn is_plain(c: char) -> bool {
    !c.is_whitespace() && !SPECIAL.contains(c)
}

/// Whether `w` can be written as a literal without quotes.
pub(crate) fn is_bare_literal(w: &str) -> bool {
    !w.is_empty() && w.chars().all(is_plain)
}

pub(crate) fn is_bare_value(v: &str) -> bool {
    is_bare_literal(v)
}

/// Parses a graph query, checking entity and edge labels against `schema`.
pub fn parse_graph_query(text: &str, schema: &Schema) -> Result<GraphQuery, QueryError> {
    let mut p = Parser {
        src: text,
        pos: 0,
        schema,
        names: BTreeSet::new(),
    };
    let elems = p.parse_seq(false)?;
    p.skip_ws();
    if p.pos < text.len() {
        // only a stray ')' can stop a top-level sequence early
        return Err(p.error("an element or end of query"));
    }
    if elems.is_empty() {
        return Err(QueryError::at(QueryErrorKind::Empty, 0));
    }
    GraphQuery::new(elems).map_err(|e| QueryError {
        position: e.position.or(Some(0)),
        ..e
    })
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    schema: &'a Schema,
    names: BTreeSet<String>,
}

impl<'a> Parser<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn eat(&mut self, s: &str) -> bool {
        if self.rest().starts_with(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.bump();
        }
    }

    fn error(&self, expected: &str) -> QueryError {
        QueryError::at(
            QueryErrorKind::Syntax {
                expected: expected.to_string(),
            },
            self.pos,
        )
    }

    fn expect(&mut self, s: &str) -> Result<(), QueryError> {
        if self.eat(s) {
            Ok(())
        } else {
            Err(self.error(&format!("{s:?}")))
        }
    }

    fn parse_seq(&mut self, in_capture: bool) -> Result<Vec<PatternElem>, QueryError> {
        let mut elems: Vec<PatternElem> = Vec::new();
        let mut last_traversal: Option<usize> = None;
        loop {
            self.skip_ws();
            let start = self.pos;
            let Some(c) = self.peek() else { break };
            if c == ')' {
                break;
            }
            let elem = match c {
                '[' => self.parse_bracket()?,
                '(' => self.parse_capture()?,
                '>' | '<' => {
                    if in_capture {
                        return Err(QueryError::at(QueryErrorKind::TraversalInCapture, start));
                    }
                    if elems.is_empty() || last_traversal.is_some() {
                        return Err(QueryError::at(QueryErrorKind::DanglingTraversal, start));
                    }
                    last_traversal = Some(start);
                    elems.push(self.parse_traversal()?);
                    continue;
                }
                '"' => PatternElem::Literal(self.parse_quoted()?),
                c if is_plain(c) => PatternElem::Literal(self.take_plain()),
                _ => return Err(self.error("a literal, '[', '(?<', '>' or '<'")),
            };
            last_traversal = None;
            elems.push(elem);
        }
        if let Some(pos) = last_traversal {
            return Err(QueryError::at(QueryErrorKind::DanglingTraversal, pos));
        }
        Ok(elems)
    }

    fn take_plain(&mut self) -> String {
        let start = self.pos;
        while self.peek().is_some_and(is_plain) {
            self.bump();
        }
        self.src[start..self.pos].to_string()
    }

    fn parse_quoted(&mut self) -> Result<String, QueryError> {
        let start = self.pos;
        self.expect("\"")?;
        let mut out = String::new();
        loop {
            match self.bump() {
                None => {
                    return Err(QueryError::at(
                        QueryErrorKind::Syntax {
                            expected: "closing '\"'".into(),
                        },
                        start,
                    ))
                }
                Some('"') => break,
                Some('\\') => match self.bump() {
                    Some(c @ ('"' | '\\')) => out.push(c),
                    _ => return Err(self.error("'\\\"' or '\\\\' escape")),
                },
                Some(c) => out.push(c),
            }
        }
        if out.is_empty() {
            return Err(QueryError::at(QueryErrorKind::EmptyValue, start));
        }
        Ok(out)
    }

    fn parse_bracket(&mut self) -> Result<PatternElem, QueryError> {
        self.expect("[")?;
        let mut alternatives = Vec::new();
        self.skip_ws();
        if !self.eat("]") {
            loop {
                self.skip_ws();
                let attr = if self.eat("word") {
                    Attribute::Word
                } else if self.eat("entity") {
                    Attribute::Entity
                } else {
                    return Err(self.error("'word' or 'entity'"));
                };
                self.skip_ws();
                self.expect("=")?;
                self.skip_ws();
                let value_pos = self.pos;
                let value = match self.peek() {
                    Some('"') => self.parse_quoted()?,
                    Some(c) if is_plain(c) => self.take_plain(),
                    _ => return Err(self.error("a value")),
                };
                if attr == Attribute::Entity {
                    self.check_entity(&value, value_pos)?;
                }
                alternatives.push((attr, value));
                self.skip_ws();
                if self.eat("]") {
                    break;
                }
                if !self.eat("|") {
                    return Err(self.error("'|' or ']'"));
                }
            }
        }
        let quant = self.parse_quantifier()?;
        Ok(PatternElem::Constraint(TokenConstraint { alternatives }, quant))
    }

    fn check_entity(&self, value: &str, pos: usize) -> Result<(), QueryError> {
        match BioTag::parse(value) {
            Some(BioTag::Outside) => Ok(()),
            Some(tag) => {
                let label = tag.label().unwrap_or_default();
                if self.schema.has_node_label(label) {
                    Ok(())
                } else {
                    Err(QueryError::at(QueryErrorKind::UnknownLabel(label.to_string()), pos))
                }
            }
            None => Err(QueryError::at(
                QueryErrorKind::Syntax {
                    expected: "an entity tag of the form O, B-<label> or I-<label>".into(),
                },
                pos,
            )),
        }
    }

    fn parse_quantifier(&mut self) -> Result<Quantifier, QueryError> {
        if self.eat("*") {
            return Ok(Quantifier::Star);
        }
        if self.eat("+") {
            return Ok(Quantifier::Plus);
        }
        let start = self.pos;
        if !self.eat("{") {
            return Ok(Quantifier::One);
        }
        let m = self.parse_number()?;
        self.expect(",")?;
        let n = self.parse_number()?;
        self.expect("}")?;
        if m > n || n == 0 {
            return Err(QueryError::at(QueryErrorKind::BadRange(m, n), start));
        }
        Ok(Quantifier::Range(m, n))
    }

    fn parse_number(&mut self) -> Result<u32, QueryError> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.bump();
        }
        self.src[start..self.pos].parse().map_err(|_| {
            QueryError::at(
                QueryErrorKind::Syntax {
                    expected: "a repetition count".into(),
                },
                start,
            )
        })
    }

    fn parse_capture(&mut self) -> Result<PatternElem, QueryError> {
        let start = self.pos;
        self.expect("(?<")?;
        let name_pos = self.pos;
        let name = self.take_while(|c| c.is_ascii_alphanumeric() || c == '_');
        if name.is_empty() || name.starts_with(|c: char| c.is_ascii_digit()) {
            self.pos = name_pos;
            return Err(self.error("a capture name"));
        }
        self.expect(">")?;
        if !self.names.insert(name.clone()) {
            return Err(QueryError::at(QueryErrorKind::DuplicateCapture(name), name_pos));
        }
        let elems = self.parse_seq(true)?;
        if !self.eat(")") {
            return Err(self.error("')'"));
        }
        if elems.is_empty() {
            return Err(QueryError::at(QueryErrorKind::EmptyCapture, start));
        }
        Ok(PatternElem::Capture { name, elems })
    }

    fn parse_traversal(&mut self) -> Result<PatternElem, QueryError> {
        let direction = match self.bump() {
            Some('>') => Direction::Outgoing,
            _ => Direction::Incoming,
        };
        let label_pos = self.pos;
        let label = self.take_plain();
        if label.is_empty() {
            return Err(self.error("an edge label"));
        }
        if !self.schema.has_edge_label(&label) {
            return Err(QueryError::at(QueryErrorKind::UnknownEdgeLabel(label), label_pos));
        }
        Ok(PatternElem::Traversal { direction, label })
    }

    fn take_while(&mut self, f: impl Fn(char) -> bool) -> String {
        let start = self.pos;
        while self.peek().is_some_and(&f) {
            self.bump();
        }
        self.src[start..self.pos].to_string()
    }
}

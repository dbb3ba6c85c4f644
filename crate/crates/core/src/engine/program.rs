//! Compiled form of a graph query and its backtracking interpreter.
//!
//! Each top-level element becomes one instruction group. A `Mark` opens
//! every run of token elements (at the start and after each traversal);
//! a `Jump` leaves from any mention anchored between the mark and the
//! current position.

use std::collections::BTreeMap;

use crate::corpus::{Direction, SentenceGraph};
use crate::query::{Attribute, CasePolicy, GraphQuery, PatternElem, Quantifier, TokenConstraint};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenTest {
    Any,
    /// Word equality; `lowered` means both sides are compared lowercased.
    Word { value: String, lowered: bool },
    Entity(String),
    AnyOf(Vec<TokenTest>),
}

impl TokenTest {
    fn from_constraint(c: &TokenConstraint, case: &CasePolicy) -> Self {
        let mut tests: Vec<TokenTest> = c
            .alternatives
            .iter()
            .map(|(attr, value)| match attr {
                Attribute::Word if case.bracket_case_insensitive => TokenTest::Word {
                    value: value.to_lowercase(),
                    lowered: true,
                },
                Attribute::Word => TokenTest::Word {
                    value: value.clone(),
                    lowered: false,
                },
                Attribute::Entity => TokenTest::Entity(value.clone()),
            })
            .collect();
        match tests.len() {
            0 => TokenTest::Any,
            1 => tests.pop().unwrap(),
            _ => TokenTest::AnyOf(tests),
        }
    }

    fn matches(&self, s: &SentenceGraph, lowered: &[String], pos: usize) -> bool {
        match self {
            TokenTest::Any => true,
            TokenTest::Word { value, lowered: false } => s.tokens[pos].word == *value,
            TokenTest::Word { value, lowered: true } => lowered[pos] == *value,
            TokenTest::Entity(tag) => s.tokens[pos].entity_bio == *tag,
            TokenTest::AnyOf(tests) => tests.iter().any(|t| t.matches(s, lowered, pos)),
        }
    }

    fn needs_lowercase(&self) -> bool {
        match self {
            TokenTest::Word { lowered, .. } => *lowered,
            TokenTest::AnyOf(tests) => tests.iter().any(TokenTest::needs_lowercase),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Inst {
    /// Start of a run of token elements.
    Mark,
    MatchToken(TokenTest),
    /// `min..=max` repetitions (`None` = unbounded). A wildcard repeat
    /// tries every count; any other repeat takes the longest run.
    Repeat { test: TokenTest, min: u32, max: Option<u32> },
    /// Move to each target of `label` edges leaving the marked span.
    Jump { direction: Direction, label: String },
    BeginCapture(usize),
    EndCapture(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchProgram {
    insts: Vec<Inst>,
    capture_names: Vec<String>,
    groups: usize,
    needs_lowercase: bool,
}

/// One match inside a sentence, in token indices.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SentenceMatch {
    pub span: (u32, u32),
    pub captures: BTreeMap<String, (u32, u32)>,
}

pub fn compile(q: &GraphQuery, case: &CasePolicy) -> MatchProgram {
    let mut p = MatchProgram {
        insts: Vec::new(),
        capture_names: Vec::new(),
        groups: 0,
        needs_lowercase: false,
    };
    let mut segment_start = true;
    for elem in q.elems() {
        let is_traversal = matches!(elem, PatternElem::Traversal { .. });
        if segment_start && !is_traversal {
            p.insts.push(Inst::Mark);
        }
        segment_start = is_traversal;
        p.groups += 1;
        p.emit(elem, case);
    }
    p.needs_lowercase = p.insts.iter().any(|i| match i {
        Inst::MatchToken(t) | Inst::Repeat { test: t, .. } => t.needs_lowercase(),
        _ => false,
    });
    p
}

impl MatchProgram {
    fn emit(&mut self, elem: &PatternElem, case: &CasePolicy) {
        match elem {
            PatternElem::Literal(w) => {
                let test = if case.literal_case_insensitive {
                    TokenTest::Word {
                        value: w.to_lowercase(),
                        lowered: true,
                    }
                } else {
                    TokenTest::Word {
                        value: w.clone(),
                        lowered: false,
                    }
                };
                self.insts.push(Inst::MatchToken(test));
            }
            PatternElem::Constraint(c, Quantifier::One) => {
                self.insts.push(Inst::MatchToken(TokenTest::from_constraint(c, case)));
            }
            PatternElem::Constraint(c, q) => self.insts.push(Inst::Repeat {
                test: TokenTest::from_constraint(c, case),
                min: q.min(),
                max: q.max(),
            }),
            PatternElem::Capture { name, elems } => {
                let slot = self.capture_names.len();
                self.capture_names.push(name.clone());
                self.insts.push(Inst::BeginCapture(slot));
                for e in elems {
                    self.emit(e, case);
                }
                self.insts.push(Inst::EndCapture(slot));
            }
            PatternElem::Traversal { direction, label } => self.insts.push(Inst::Jump {
                direction: *direction,
                label: label.clone(),
            }),
        }
    }

    pub fn instructions(&self) -> &[Inst] {
        &self.insts
    }

    /// Number of top-level elements compiled.
    pub fn groups(&self) -> usize {
        self.groups
    }

    pub fn capture_names(&self) -> &[String] {
        &self.capture_names
    }

    /// Every distinct capture assignment in `s`; assignments differing only
    /// in the full span keep the leftmost, shortest one.
    pub fn match_sentence(&self, s: &SentenceGraph) -> Vec<SentenceMatch> {
        if s.is_empty() {
            return Vec::new();
        }
        let lowered: Vec<String> = if self.needs_lowercase {
            s.tokens.iter().map(|t| t.word.to_lowercase()).collect()
        } else {
            Vec::new()
        };
        let mut vm = Vm {
            prog: self,
            s,
            lowered: &lowered,
            found: BTreeMap::new(),
        };
        let n = self.capture_names.len();
        for start in 0..s.len() {
            let st = VmState {
                pos: start,
                mark: start,
                lo: usize::MAX,
                hi: 0,
                open: vec![0; n],
                caps: vec![(0, 0); n],
            };
            vm.run(0, st);
        }
        vm.found
            .into_iter()
            .map(|(caps, span)| SentenceMatch {
                span,
                captures: self.capture_names.iter().cloned().zip(caps).collect(),
            })
            .collect()
    }
}

#[derive(Clone)]
struct VmState {
    pos: usize,
    mark: usize,
    lo: usize,
    hi: usize,
    open: Vec<usize>,
    caps: Vec<(u32, u32)>,
}

impl VmState {
    fn consume(&mut self, count: usize) {
        if count > 0 {
            self.lo = self.lo.min(self.pos);
            self.hi = self.hi.max(self.pos + count);
            self.pos += count;
        }
    }
}

struct Vm<'a> {
    prog: &'a MatchProgram,
    s: &'a SentenceGraph,
    lowered: &'a [String],
    /// capture tuple -> smallest full span
    found: BTreeMap<Vec<(u32, u32)>, (u32, u32)>,
}

impl Vm<'_> {
    fn run(&mut self, mut pc: usize, mut st: VmState) {
        let len = self.s.len();
        loop {
            let Some(inst) = self.prog.insts.get(pc) else {
                self.accept(st);
                return;
            };
            pc += 1;
            match inst {
                Inst::Mark => st.mark = st.pos,
                Inst::MatchToken(test) => {
                    if st.pos >= len || !test.matches(self.s, self.lowered, st.pos) {
                        return;
                    }
                    st.consume(1);
                }
                Inst::Repeat { test, min, max } => {
                    let room = len - st.pos.min(len);
                    let cap = max.map_or(room, |m| (m as usize).min(room));
                    let min = *min as usize;
                    if *test == TokenTest::Any {
                        if min > cap {
                            return;
                        }
                        for count in min..cap {
                            let mut next = st.clone();
                            next.consume(count);
                            self.run(pc, next);
                        }
                        st.consume(cap);
                    } else {
                        let run = (0..cap)
                            .take_while(|i| test.matches(self.s, self.lowered, st.pos + i))
                            .count();
                        if run < min {
                            return;
                        }
                        st.consume(run);
                    }
                }
                Inst::Jump { direction, label } => {
                    let targets = self.s.edge_targets_unchecked(st.mark..st.pos, label, *direction);
                    let Some((&last, rest)) = targets.split_last() else { return };
                    for &t in rest {
                        let mut next = st.clone();
                        next.pos = t;
                        self.run(pc, next);
                    }
                    st.pos = last;
                }
                Inst::BeginCapture(i) => st.open[*i] = st.pos,
                Inst::EndCapture(i) => st.caps[*i] = (st.open[*i] as u32, st.pos as u32),
            }
        }
    }

    fn accept(&mut self, st: VmState) {
        if st.lo > st.hi {
            return;
        }
        let span = (st.lo as u32, st.hi as u32);
        self.found
            .entry(st.caps)
            .and_modify(|best| *best = (*best).min(span))
            .or_insert(span);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{SemanticEdge, Token};
    use crate::query::parse_graph_query;
    use crate::schema::Schema;

    fn prog(q: &str) -> MatchProgram {
        compile(&parse_graph_query(q, &Schema::default()).unwrap(), &CasePolicy::default())
    }

    fn sentence(words: &[(&str, &str)], edges: &[(usize, usize, &str)]) -> SentenceGraph {
        SentenceGraph::new(
            words.iter().map(|(w, t)| Token::new(*w, *t)).collect(),
            edges.iter().map(|(h, t, l)| SemanticEdge::new(*h, *t, *l)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn q7_compiles_to_five_groups() {
        let p = prog("plasma <acts-on diluted >using (?<reagent> [entity=B-Reagent][entity=I-Reagent]*)");
        assert_eq!(p.groups(), 5);
        assert_eq!(p.instructions().iter().filter(|i| **i == Inst::Mark).count(), 3);
        assert_eq!(p.capture_names(), ["reagent"]);
    }

    #[test]
    fn single_literal_is_one_token_test() {
        let p = prog("DMF");
        let tests: Vec<_> = p.instructions().iter().filter(|i| matches!(i, Inst::MatchToken(_))).collect();
        assert_eq!(tests.len(), 1);
        assert_eq!(p.groups(), 1);
    }

    #[test]
    fn q10_has_bounded_wildcard_repeat() {
        let p = prog("HATU >measure (?<mole> [] [word=mmol|word=mol]) []{1,10} DMF >measure (?<volume> [] [word=ml|word=l])");
        assert!(p.instructions().contains(&Inst::Repeat {
            test: TokenTest::Any,
            min: 1,
            max: Some(10)
        }));
        assert_eq!(p.groups(), 7);
    }

    #[test]
    fn empty_sentence_has_no_matches() {
        let s = SentenceGraph::new(vec![], vec![]).unwrap();
        assert!(prog("DMF").match_sentence(&s).is_empty());
    }

    #[test]
    fn literal_case_policy() {
        let s = sentence(&[("dmf", "O"), ("DMF", "O")], &[]);
        assert_eq!(prog("DMF").match_sentence(&s).len(), 1); // no captures: one per sentence
        assert_eq!(prog("(?<x> DMF)").match_sentence(&s).len(), 2);
        assert_eq!(prog("(?<x> [word=DMF])").match_sentence(&s).len(), 1);
    }

    #[test]
    fn non_wildcard_repeat_takes_longest_run() {
        let s = sentence(&[("saline", "B-Reagent"), ("buffer", "I-Reagent"), ("x", "O")], &[]);
        let m = prog("(?<r> [entity=B-Reagent][entity=I-Reagent]*)").match_sentence(&s);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].captures["r"], (0, 2));
    }

    #[test]
    fn wildcard_gap_enumerates_counts() {
        let s = sentence(&[("a", "O"), ("b", "O"), ("c", "O"), ("b", "O")], &[]);
        let m = prog("a []{1,3} (?<x> b)").match_sentence(&s);
        let caps: Vec<_> = m.iter().map(|m| m.captures["x"]).collect();
        assert_eq!(caps, vec![(3, 4)]);
        let m = prog("a []{0,3} (?<x> b)").match_sentence(&s);
        let caps: Vec<_> = m.iter().map(|m| m.captures["x"]).collect();
        assert_eq!(caps, vec![(1, 2), (3, 4)]);
    }

    #[test]
    fn traversal_leaves_from_any_anchor_in_span() {
        // "PTFE filter ( 0.45 μm )" with measure(PTFE filter -> 0.45 μm)
        let s = sentence(
            &[
                ("PTFE", "B-Equipment"),
                ("filter", "I-Equipment"),
                ("(", "O"),
                ("0.45", "B-Generic-Measure"),
                ("μm", "I-Generic-Measure"),
                (")", "O"),
            ],
            &[(0, 1, "measure")],
        );
        let m = prog("PTFE filter >measure (?<pore_size> [entity=B-Generic-Measure][entity=I-Generic-Measure]*)")
            .match_sentence(&s);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].captures["pore_size"], (3, 5));
        assert_eq!(m[0].span, (0, 5));
        // a span that misses the mention anchor cannot traverse
        assert!(prog("filter >measure [entity=B-Generic-Measure]").match_sentence(&s).is_empty());
    }
}

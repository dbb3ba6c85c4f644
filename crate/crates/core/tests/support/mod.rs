#![allow(dead_code)]

use std::collections::BTreeMap;

use procsearch_core::corpus::{ProcedureDoc, SemanticEdge, SentenceGraph, Source, Token};

pub fn sentence(tokens: &[(&str, &str)], edges: &[(usize, usize, &str)]) -> SentenceGraph {
    SentenceGraph::new(
        tokens.iter().map(|(w, t)| Token::new(*w, *t)).collect(),
        edges.iter().map(|(h, t, l)| SemanticEdge::new(*h, *t, *l)).collect(),
    )
    .unwrap()
}

/// "plasma was diluted using saline buffer ."
/// mentions: 0 plasma, 1 diluted, 2 saline buffer
pub fn plasma_sentence() -> SentenceGraph {
    sentence(
        &[
            ("plasma", "B-Reagent"),
            ("was", "O"),
            ("diluted", "B-Action"),
            ("using", "O"),
            ("saline", "B-Reagent"),
            ("buffer", "I-Reagent"),
            (".", "O"),
        ],
        &[(1, 0, "acts-on"), (1, 2, "using")],
    )
}

/// "Dissolve HATU ( 380 mg ) in DMF ( 1 ml )"
/// mentions: 0 Dissolve, 1 HATU, 2 380 mg, 3 DMF, 4 1 ml
pub fn hatu_sentence() -> SentenceGraph {
    sentence(
        &[
            ("Dissolve", "B-Action"),
            ("HATU", "B-Reagent"),
            ("(", "O"),
            ("380", "B-Amount"),
            ("mg", "I-Amount"),
            (")", "O"),
            ("in", "O"),
            ("DMF", "B-Reagent"),
            ("(", "O"),
            ("1", "B-Amount"),
            ("ml", "I-Amount"),
            (")", "O"),
        ],
        &[(0, 1, "acts-on"), (0, 3, "using"), (1, 2, "measure"), (3, 4, "measure")],
    )
}

pub fn doc(id: &str, sentences: Vec<SentenceGraph>, slots: &[(&str, &[&str])]) -> ProcedureDoc {
    ProcedureDoc {
        id: id.into(),
        source: Source::US,
        patent_id: "US1234567A1".into(),
        sentences,
        slots: slots
            .iter()
            .map(|(k, vs)| (k.to_string(), vs.iter().map(|v| v.to_string()).collect()))
            .collect::<BTreeMap<_, _>>(),
    }
}

/// Q10 with `mg` accepted as a mole unit, so that it fits the hand-traced
/// sentence.
pub const Q10_WITH_MG: &str =
    "HATU >measure (?<mole> [] [word=mmol|word=mol|word=mg]) []{1,10} DMF >measure (?<volume> [] [word=ml|word=l])";

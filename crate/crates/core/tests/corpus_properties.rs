use std::collections::BTreeMap;

use procsearch_core::corpus::{validate_document, Mention, ProcedureDoc, SemanticEdge, SentenceGraph, Source, Token};
use procsearch_core::ingest::{generate_fixtures, read_corpus, write_corpus, FixtureSpec, IngestError};
use procsearch_core::schema::{DEFAULT_EDGE_LABELS, DEFAULT_NODE_LABELS, DEFAULT_SLOT_NAMES};
use procsearch_core::Schema;
use proptest::prelude::*;

fn arb_sentence() -> impl Strategy<Value = SentenceGraph> {
    (1usize..12)
        .prop_flat_map(|len| {
            (
                prop::collection::vec("\\PC{1,5}|[a-z\"\\\\\t]{1,4}", len),
                prop::collection::vec((0usize..3, prop::sample::select(&DEFAULT_NODE_LABELS[..])), len),
                prop::collection::vec((0usize..16, 0usize..16, prop::sample::select(&DEFAULT_EDGE_LABELS[..])), 0..5),
            )
        })
        .prop_map(|(words, tags, edges)| {
            // 0 = O, 1 = B-label, 2 = continue the previous mention
            let mut tokens = Vec::new();
            let mut open: Option<&str> = None;
            for (w, (kind, label)) in words.into_iter().zip(tags) {
                let tag = match (kind, open) {
                    (2, Some(l)) => format!("I-{l}"),
                    (1, _) | (2, None) => {
                        open = Some(label);
                        format!("B-{label}")
                    }
                    _ => {
                        open = None;
                        "O".to_string()
                    }
                };
                tokens.push(Token::new(w, tag));
            }
            let probe = SentenceGraph::new(tokens.clone(), vec![]).unwrap();
            let n = probe.mentions.len();
            let edges = edges
                .into_iter()
                .filter(|(h, t, _)| n >= 2 && h % n != t % n)
                .map(|(h, t, l)| SemanticEdge::new(h % n, t % n, l))
                .collect();
            SentenceGraph::new(tokens, edges).unwrap()
        })
}

fn arb_doc() -> impl Strategy<Value = ProcedureDoc> {
    (
        "[a-zA-Z0-9_-]{1,12}",
        prop::sample::select(vec![Source::US, Source::EP, Source::OTHER]),
        "[A-Z0-9]{0,10}",
        prop::collection::vec(arb_sentence(), 0..4),
        prop::collection::btree_map(
            prop::sample::select(&DEFAULT_SLOT_NAMES[..]),
            prop::collection::vec("\\PC{1,12}", 0..3),
            0..4,
        ),
    )
        .prop_map(|(id, source, patent_id, sentences, slots)| ProcedureDoc {
            id,
            source,
            patent_id,
            sentences,
            slots: slots.into_iter().map(|(k, v)| (k.to_string(), v)).collect::<BTreeMap<_, _>>(),
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn generated_docs_are_valid(doc in arb_doc()) {
        prop_assert!(validate_document(&doc, &Schema::default()).is_valid());
    }

    #[test]
    fn read_after_write_is_identity(docs in prop::collection::vec(arb_doc(), 0..6)) {
        // ids must be unique within a corpus
        let docs: Vec<ProcedureDoc> = docs
            .into_iter()
            .enumerate()
            .map(|(i, mut d)| {
                d.id = format!("{i}-{}", d.id);
                d
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        write_corpus(&docs, &Schema::default(), &path).unwrap();
        let (schema, back) = read_corpus(&path).unwrap();
        prop_assert_eq!(schema, Schema::default());
        prop_assert_eq!(back, docs);
    }
}

/// Ways to break a valid document, each of which validation must notice.
#[derive(Debug, Clone, Copy)]
enum Mutation {
    OrphanInside,
    MalformedTag,
    UnknownNodeLabel,
    UnknownEdgeLabel,
    EdgeOutOfRange,
    SelfLoop,
    UnknownSlot,
    EmptySlotValue,
    StaleMentions,
}

const MUTATIONS: [Mutation; 9] = [
    Mutation::OrphanInside,
    Mutation::MalformedTag,
    Mutation::UnknownNodeLabel,
    Mutation::UnknownEdgeLabel,
    Mutation::EdgeOutOfRange,
    Mutation::SelfLoop,
    Mutation::UnknownSlot,
    Mutation::EmptySlotValue,
    Mutation::StaleMentions,
];

fn mutate(doc: &mut ProcedureDoc, m: Mutation, pick: usize) {
    let si = pick % doc.sentences.len();
    let s = &mut doc.sentences[si];
    let ti = pick % s.tokens.len();
    match m {
        Mutation::OrphanInside => {
            // first token cannot continue anything
            s.tokens[0].entity_bio = "I-Reagent".into();
        }
        Mutation::MalformedTag => s.tokens[ti].entity_bio = "X-Reagent".into(),
        Mutation::UnknownNodeLabel => s.tokens[ti].entity_bio = "B-Catalyst".into(),
        Mutation::UnknownEdgeLabel => s.edges.push(SemanticEdge::new(0, 1, "dissolves-in")),
        Mutation::EdgeOutOfRange => {
            let n = s.mentions.len();
            s.edges.push(SemanticEdge::new(0, n + pick % 3, "using"));
        }
        Mutation::SelfLoop => s.edges.push(SemanticEdge::new(0, 0, "using")),
        Mutation::UnknownSlot => {
            doc.slots.insert("catalyst".into(), vec!["Pd/C".into()]);
        }
        Mutation::EmptySlotValue => {
            doc.slots.entry("reagent".into()).or_default().push(String::new());
        }
        Mutation::StaleMentions => s.mentions.push(Mention {
            start: s.tokens.len(),
            end: s.tokens.len() + 1,
            label: "Reagent".into(),
        }),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn mutations_are_reported(doc_ix in 0usize..200, mutation in prop::sample::select(MUTATIONS.to_vec()), pick in 0usize..1000) {
        let docs = generate_fixtures(&FixtureSpec::standard(41, 200)).unwrap();
        let mut doc = docs[doc_ix].clone();
        prop_assert!(validate_document(&doc, &Schema::default()).is_valid());
        mutate(&mut doc, mutation, pick);
        let report = validate_document(&doc, &Schema::default());
        prop_assert!(!report.is_valid(), "{:?} not reported", mutation);
    }
}

#[test]
fn ingest_rejects_mutated_record_at_its_line() {
    let mut docs = generate_fixtures(&FixtureSpec::standard(42, 12)).unwrap();
    mutate(&mut docs[6], Mutation::UnknownEdgeLabel, 0);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corpus.jsonl");
    write_corpus(&docs, &Schema::default(), &path).unwrap();
    let err = read_corpus(&path).unwrap_err();
    assert_eq!(err.line(), Some(7));
    assert!(matches!(err, IngestError::Schema { .. } | IngestError::Parse { .. }));
}

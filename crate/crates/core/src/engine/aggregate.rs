use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EngineError, SearchResponse};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerCount {
    pub answer: String,
    /// Number of matches whose normalized capture equals `answer`.
    pub frequency: usize,
}

/// Answers to one capture, most frequent first (ties alphabetical).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerTable {
    pub capture: String,
    pub answers: Vec<AnswerCount>,
    /// Distinct normalized answers.
    pub distinct: usize,
    /// Distinct documents contributing an answer.
    pub procedures: usize,
    /// Matches carrying the capture; equals the sum of frequencies.
    pub matches: usize,
    /// Distinct (document, answer) pairs.
    pub doc_answer_pairs: usize,
}

/// Trims, collapses internal whitespace and lowercases.
pub fn normalize_answer(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Tallies the `capture` column of `resp`. Pass an unpaged response to
/// count the whole result set.
pub fn aggregate_answers(resp: &SearchResponse, capture: &str) -> Result<AnswerTable, EngineError> {
    if !resp.capture_names.iter().any(|c| c == capture) {
        return Err(EngineError::UnknownCapture(capture.to_string()));
    }
    let mut freq: BTreeMap<String, usize> = BTreeMap::new();
    let mut docs = BTreeSet::new();
    let mut pairs = BTreeSet::new();
    let mut matches = 0;
    for m in &resp.matches {
        let Some(c) = m.captures.get(capture) else { continue };
        let answer = normalize_answer(&c.text);
        if answer.is_empty() {
            continue;
        }
        matches += 1;
        docs.insert(m.doc_ordinal);
        pairs.insert((m.doc_ordinal, answer.clone()));
        *freq.entry(answer).or_default() += 1;
    }
    let mut answers: Vec<AnswerCount> = freq
        .into_iter()
        .map(|(answer, frequency)| AnswerCount { answer, frequency })
        .collect();
    answers.sort_by(|a, b| b.frequency.cmp(&a.frequency).then_with(|| a.answer.cmp(&b.answer)));
    Ok(AnswerTable {
        capture: capture.to_string(),
        distinct: answers.len(),
        answers,
        procedures: docs.len(),
        matches,
        doc_answer_pairs: pairs.len(),
    })
}

/// `min(k, distinct)` answers drawn without replacement, returned in table
/// order. The same seed always picks the same answers.
pub fn sample_for_review(table: &AnswerTable, k: usize, seed: u64) -> Vec<AnswerCount> {
    let n = table.answers.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = sample(&mut rng, n, k.min(n)).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| table.answers[i].clone()).collect()
}

//! Deterministic generator for desk-scale annotated corpora.
//!
//! All randomness comes from SplitMix64 (Steele, Lea & Flood 2014) seeded
//! with `FixtureSpec::seed`. Draws happen in a fixed order per document:
//! source, patent number, sentence count (2..=6), then per sentence the
//! template and then each blank in pattern order. A uniform pick from a
//! list of length `n` is `next_u64() % n`. Given the same spec the output
//! is byte-identical on every platform.
//!
//! Templates are pre-tokenized patterns; `{name}` marks a blank filled
//! from a vocabulary list (or a number plus a unit) and becomes one
//! mention. Vocabulary values are tokenized with [`tokenize`].

use std::collections::BTreeMap;

use thiserror::Error;

use crate::corpus::{ProcedureDoc, SemanticEdge, SentenceGraph, Source, Token};

/// SplitMix64 pseudo-random generator.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform-ish integer in `0..n` (`n > 0`).
    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    pub fn pick<'a, T>(&mut self, items: &'a [T]) -> &'a T {
        &items[self.below(items.len())]
    }
}

/// Splits on whitespace; a trailing `.`, `,`, `;` or `:` on a longer
/// chunk becomes its own token.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let last = chunk.chars().last().unwrap();
        if chunk.chars().count() > 1 && matches!(last, '.' | ',' | ';' | ':') {
            out.push(chunk[..chunk.len() - last.len_utf8()].to_string());
            out.push(last.to_string());
        } else {
            out.push(chunk.to_string());
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BlankKind {
    /// A value from the named vocabulary list.
    Vocab(String),
    /// `"<n> <unit>"` with `n` uniform in `min..=max` and the unit from
    /// the named vocabulary list.
    Quantity { min: u32, max: u32, units: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Blank {
    pub name: String,
    pub label: String,
    pub kind: BlankKind,
    /// Protocol slot that receives the filled value, if any.
    pub slot: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateEdge {
    pub head: String,
    pub tail: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub pattern: String,
    pub blanks: Vec<Blank>,
    pub edges: Vec<TemplateEdge>,
}

impl Template {
    /// Fills every blank via `fill` and returns the annotated sentence
    /// together with the `(slot, value)` pairs it implies.
    pub fn instantiate(
        &self,
        mut fill: impl FnMut(&Blank) -> String,
    ) -> (SentenceGraph, Vec<(String, String)>) {
        let mut tokens = Vec::new();
        let mut mention_of: BTreeMap<&str, usize> = BTreeMap::new();
        let mut slots = Vec::new();
        for piece in self.pattern.split_whitespace() {
            let Some(name) = piece.strip_prefix('{').and_then(|p| p.strip_suffix('}')) else {
                tokens.push(Token::outside(piece));
                continue;
            };
            let blank = self.blanks.iter().find(|b| b.name == name).expect("template checked");
            let value = fill(blank);
            for (i, word) in tokenize(&value).into_iter().enumerate() {
                let prefix = if i == 0 { "B-" } else { "I-" };
                tokens.push(Token::new(word, format!("{prefix}{}", blank.label)));
            }
            mention_of.insert(&blank.name, mention_of.len());
            if let Some(slot) = &blank.slot {
                slots.push((slot.clone(), value));
            }
        }
        let edges = self
            .edges
            .iter()
            .map(|e| SemanticEdge::new(mention_of[e.head.as_str()], mention_of[e.tail.as_str()], e.label.clone()))
            .collect();
        let graph = SentenceGraph::new(tokens, edges).expect("generated BIO is well formed");
        (graph, slots)
    }

    fn check(&self, vocab: &BTreeMap<String, Vec<String>>) -> Result<(), FixtureError> {
        let err = |m: String| Err(FixtureError::BadTemplate(format!("{}: {m}", self.pattern)));
        let used: Vec<&str> = self
            .pattern
            .split_whitespace()
            .filter_map(|p| p.strip_prefix('{').and_then(|p| p.strip_suffix('}')))
            .collect();
        for blank in &self.blanks {
            let count = used.iter().filter(|u| **u == blank.name).count();
            if count != 1 {
                return err(format!("blank {} used {count} times", blank.name));
            }
            let key = match &blank.kind {
                BlankKind::Vocab(k) => k,
                BlankKind::Quantity { min, max, units } => {
                    if min > max {
                        return err(format!("blank {} has empty range", blank.name));
                    }
                    units
                }
            };
            match vocab.get(key) {
                None => return Err(FixtureError::UnknownVocab(key.clone())),
                Some(list) if list.is_empty() => return Err(FixtureError::EmptyVocab(key.clone())),
                Some(list) if list.iter().any(|v| tokenize(v).is_empty()) => {
                    return err(format!("vocab {key} has a blank entry"))
                }
                _ => {}
            }
        }
        for u in &used {
            if !self.blanks.iter().any(|b| b.name == *u) {
                return err(format!("undeclared blank {u}"));
            }
        }
        for e in &self.edges {
            for end in [&e.head, &e.tail] {
                if !self.blanks.iter().any(|b| &b.name == end) {
                    return err(format!("edge endpoint {end} is not a blank"));
                }
            }
            if e.head == e.tail {
                return err(format!("self edge on {}", e.head));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FixtureError {
    #[error("vocabulary list {0:?} is empty")]
    EmptyVocab(String),
    #[error("vocabulary list {0:?} is not defined")]
    UnknownVocab(String),
    #[error("no templates")]
    NoTemplates,
    #[error("bad template {0}")]
    BadTemplate(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixtureSpec {
    pub seed: u64,
    pub n_procedures: usize,
    pub vocab: BTreeMap<String, Vec<String>>,
    pub templates: Vec<Template>,
}

impl FixtureSpec {
    /// The bundled chemistry vocabulary and sentence templates.
    pub fn standard(seed: u64, n_procedures: usize) -> Self {
        FixtureSpec {
            seed,
            n_procedures,
            vocab: standard_vocab(),
            templates: standard_templates(),
        }
    }
}

/// Generates `spec.n_procedures` documents, each with 2 to 6 sentences.
pub fn generate_fixtures(spec: &FixtureSpec) -> Result<Vec<ProcedureDoc>, FixtureError> {
    if spec.templates.is_empty() {
        return Err(FixtureError::NoTemplates);
    }
    if let Some((k, _)) = spec.vocab.iter().find(|(_, v)| v.is_empty()) {
        return Err(FixtureError::EmptyVocab(k.clone()));
    }
    for t in &spec.templates {
        t.check(&spec.vocab)?;
    }

    let mut rng = SplitMix64::new(spec.seed);
    let mut docs = Vec::with_capacity(spec.n_procedures);
    for i in 0..spec.n_procedures {
        let source = *rng.pick(&[Source::US, Source::EP, Source::OTHER]);
        let number = 1_000_000 + rng.below(9_000_000);
        let patent_id = match source {
            Source::US => format!("US{number}A1"),
            Source::EP => format!("EP{number}B1"),
            Source::OTHER => String::new(),
        };
        let n_sentences = 2 + rng.below(5);
        let mut sentences = Vec::with_capacity(n_sentences);
        let mut slots: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for _ in 0..n_sentences {
            let template = rng.pick(&spec.templates);
            let (graph, filled) = template.instantiate(|blank| fill_blank(&mut rng, &spec.vocab, blank));
            sentences.push(graph);
            for (slot, value) in filled {
                let values = slots.entry(slot).or_default();
                if !values.contains(&value) {
                    values.push(value);
                }
            }
        }
        docs.push(ProcedureDoc {
            id: format!("fx{}-{i:07}", spec.seed),
            source,
            patent_id,
            sentences,
            slots,
        });
    }
    Ok(docs)
}

fn fill_blank(rng: &mut SplitMix64, vocab: &BTreeMap<String, Vec<String>>, blank: &Blank) -> String {
    match &blank.kind {
        BlankKind::Vocab(key) => rng.pick(&vocab[key]).clone(),
        BlankKind::Quantity { min, max, units } => {
            let n = *min as u64 + rng.next_u64() % (*max as u64 - *min as u64 + 1);
            let unit = rng.pick(&vocab[units]);
            format!("{n} {unit}")
        }
    }
}

fn list(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn standard_vocab() -> BTreeMap<String, Vec<String>> {
    let mut v = BTreeMap::new();
    v.insert(
        "reagent".into(),
        list(&[
            "HATU",
            "triphosgene",
            "CDI",
            "carbonyldiimidazole",
            "trimethylsilyldiazomethane",
            "chlorosulfonic acid",
            "trifluoromethanesulfonic acid",
            "EDC",
            "DCC",
            "sodium hydride",
            "potassium carbonate",
            "cesium carbonate",
            "acetic anhydride",
            "thionyl chloride",
            "oxalyl chloride",
            "lithium aluminum hydride",
            "sodium borohydride",
            "n-butyllithium",
            "di-tert-butyl dicarbonate",
            "triethylamine",
            "DIPEA",
            "benzyl bromide",
            "methyl iodide",
            "tosyl chloride",
            "boron tribromide",
            "palladium acetate",
            "NBS",
            "m-CPBA",
            "Dess-Martin periodinane",
            "TBAF",
            "pyridine",
            "Triphosgene",
            // repeated entries raise the odds of the HATU/DMF pairing
            "HATU",
            "HATU",
            "HATU",
        ]),
    );
    v.insert(
        "solvent".into(),
        list(&[
            "DMF",
            "THF",
            "DCM",
            "chlorobenzene",
            "toluene",
            "methanol",
            "ethanol",
            "ethyl acetate",
            "acetonitrile",
            "DMSO",
            "dioxane",
            "diethyl ether",
            "water",
            "dmf",
            "DMF",
            "DMF",
        ]),
    );
    v.insert(
        "product".into(),
        list(&[
            "(5-Methylpyrimidin-2-yl)methanol",
            "4-bromobenzamide",
            "methyl 4-aminobenzoate",
            "2-chloropyridine-3-carboxylic acid",
            "tert-butyl piperazine-1-carboxylate",
            "N-benzylacetamide",
            "3-phenylpropanal",
            "1-(4-fluorophenyl)ethanone",
            "ethyl 2-oxocyclohexanecarboxylate",
            "benzyl alcohol",
            "the title compound",
            "the desired amide",
        ]),
    );
    v.insert("sample".into(), list(&["plasma", "serum", "urine", "the filtrate", "the organic layer", "Plasma"]));
    v.insert("diluent".into(), list(&["saline buffer", "water", "PBS", "brine", "ethyl acetate", "phosphate buffer", "methanol"]));
    v.insert("base".into(), list(&["NaOH", "KOH", "HCl", "sodium hydroxide", "ammonia", "NaHCO3"]));
    v.insert("ph".into(), list(&["pH 7", "pH 2", "pH 8", "pH 7.5", "pH 10", "pH 4", "pH 9"]));
    v.insert(
        "filter".into(),
        list(&["PTFE filter", "nylon filter", "glass fiber filter", "Celite pad", "PVDF membrane", "PTFE membrane"]),
    );
    v.insert("pore".into(), list(&["0.45 μm", "0.22 μm", "0.2 μm", "5 μm", "1 μm", "0.1 μm"]));
    v.insert(
        "temperature".into(),
        list(&["0 °C", "25 °C", "room temperature", "80 °C", "-78 °C", "reflux", "60 °C", "100 °C"]),
    );
    v.insert("layer".into(), list(&["organic layer", "combined extracts", "filtrate", "aqueous phase"]));
    v.insert("drying_agent".into(), list(&["Na2SO4", "MgSO4", "sodium sulfate", "magnesium sulfate"]));
    v.insert("reagent_unit".into(), list(&["mg", "g", "mmol", "mol"]));
    v.insert("solvent_unit".into(), list(&["ml", "mL", "l"]));
    v.insert("time_unit".into(), list(&["h", "min", "hours"]));
    v.insert("percent".into(), list(&["%"]));
    v.insert("dissolve_verb".into(), list(&["Dissolve", "Suspend"]));
    v.insert("stir_verb".into(), list(&["stir", "heat"]));
    v.insert("add_verb".into(), list(&["added", "introduced"]));
    v.insert("dilute_verb".into(), list(&["diluted", "washed", "extracted", "treated"]));
    v.insert("titrate_verb".into(), list(&["titrated", "adjusted", "neutralized"]));
    v.insert("filter_verb".into(), list(&["Filter", "Pass"]));
    v.insert("react_verb".into(), list(&["stirred", "heated", "refluxed"]));
    v.insert("purify_verb".into(), list(&["purified", "recrystallized", "chromatographed"]));
    v.insert("dry_verb".into(), list(&["dried", "washed"]));
    v.insert("concentrate_verb".into(), list(&["concentrated", "evaporated"]));
    v
}

fn blank(name: &str, label: &str, vocab: &str, slot: Option<&str>) -> Blank {
    Blank {
        name: name.into(),
        label: label.into(),
        kind: BlankKind::Vocab(vocab.into()),
        slot: slot.map(Into::into),
    }
}

fn quantity(name: &str, label: &str, min: u32, max: u32, units: &str, slot: Option<&str>) -> Blank {
    Blank {
        name: name.into(),
        label: label.into(),
        kind: BlankKind::Quantity {
            min,
            max,
            units: units.into(),
        },
        slot: slot.map(Into::into),
    }
}

fn edge(head: &str, tail: &str, label: &str) -> TemplateEdge {
    TemplateEdge {
        head: head.into(),
        tail: tail.into(),
        label: label.into(),
    }
}

fn standard_templates() -> Vec<Template> {
    vec![
        Template {
            pattern: "{act} {r} ( {ra} ) in {s} ( {sa} ) and {stir} for {t} at {tp} .".into(),
            blanks: vec![
                blank("act", "Action", "dissolve_verb", None),
                blank("r", "Reagent", "reagent", Some("reagent")),
                quantity("ra", "Amount", 1, 500, "reagent_unit", None),
                blank("s", "Reagent", "solvent", Some("solvent")),
                quantity("sa", "Amount", 1, 50, "solvent_unit", None),
                blank("stir", "Action", "stir_verb", None),
                quantity("t", "Time", 1, 48, "time_unit", Some("reaction_time")),
                blank("tp", "Temperature", "temperature", Some("temperature")),
            ],
            edges: vec![
                edge("act", "r", "acts-on"),
                edge("act", "s", "using"),
                edge("r", "ra", "measure"),
                edge("s", "sa", "measure"),
                edge("stir", "t", "setting"),
                edge("stir", "tp", "setting"),
            ],
        },
        Template {
            pattern: "{r} ( {ra} ) was {add} to a solution of {sm} in {s} .".into(),
            blanks: vec![
                blank("r", "Reagent", "reagent", Some("reagent")),
                quantity("ra", "Amount", 1, 500, "reagent_unit", None),
                blank("add", "Action", "add_verb", None),
                blank("sm", "Reagent", "product", None),
                blank("s", "Reagent", "solvent", Some("solvent")),
            ],
            edges: vec![
                edge("add", "r", "acts-on"),
                edge("add", "sm", "site"),
                edge("add", "s", "using"),
                edge("r", "ra", "measure"),
            ],
        },
        Template {
            pattern: "{sample} was {dil} using {diluent} .".into(),
            blanks: vec![
                blank("sample", "Reagent", "sample", None),
                blank("dil", "Action", "dilute_verb", None),
                blank("diluent", "Reagent", "diluent", Some("solvent")),
            ],
            edges: vec![edge("dil", "sample", "acts-on"), edge("dil", "diluent", "using")],
        },
        Template {
            pattern: "The solution was {tit} with {base} to {ph} .".into(),
            blanks: vec![
                blank("tit", "Action", "titrate_verb", None),
                blank("base", "Reagent", "base", Some("reagent")),
                blank("ph", "pH", "ph", None),
            ],
            edges: vec![edge("tit", "base", "using"), edge("tit", "ph", "setting")],
        },
        Template {
            pattern: "{filt} the mixture through a {filter} ( {pore} ) .".into(),
            blanks: vec![
                blank("filt", "Action", "filter_verb", None),
                blank("filter", "Equipment", "filter", None),
                blank("pore", "Generic-Measure", "pore", None),
            ],
            edges: vec![edge("filt", "filter", "using"), edge("filter", "pore", "measure")],
        },
        Template {
            pattern: "The reaction mixture was {stir} at {tp} for {t} .".into(),
            blanks: vec![
                blank("stir", "Action", "react_verb", None),
                blank("tp", "Temperature", "temperature", Some("temperature")),
                quantity("t", "Time", 1, 72, "time_unit", Some("reaction_time")),
            ],
            edges: vec![edge("stir", "tp", "setting"), edge("stir", "t", "setting")],
        },
        Template {
            pattern: "The residue was {purify} to give {p} ( {y} ) .".into(),
            blanks: vec![
                blank("purify", "Action", "purify_verb", None),
                blank("p", "Reagent", "product", Some("product")),
                quantity("y", "Yield", 20, 99, "percent", Some("yield_percent")),
            ],
            edges: vec![edge("purify", "p", "creates"), edge("p", "y", "measure")],
        },
        Template {
            pattern: "The {layer} was {dry} over {agent} and {conc} under reduced pressure .".into(),
            blanks: vec![
                blank("layer", "Mixture", "layer", None),
                blank("dry", "Action", "dry_verb", None),
                blank("agent", "Reagent", "drying_agent", None),
                blank("conc", "Action", "concentrate_verb", None),
            ],
            edges: vec![
                edge("dry", "layer", "acts-on"),
                edge("dry", "agent", "using"),
                edge("conc", "layer", "acts-on"),
            ],
        },
    ]
}

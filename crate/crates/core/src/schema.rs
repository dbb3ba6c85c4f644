//! Label inventories for node types, edge relations and protocol slots.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Node (entity) types recognised by the default schema.
pub const DEFAULT_NODE_LABELS: [&str; 24] = [
    "Action",
    "Reagent",
    "Amount",
    "Concentration",
    "Equipment",
    "Generic-Measure",
    "pH",
    "Temperature",
    "Time",
    "Size",
    "Speed",
    "Method",
    "Modifier",
    "Location",
    "Numerical",
    "Measure-Type",
    "Mention",
    "Seal",
    "Yield",
    "Pressure",
    "Atmosphere",
    "Density",
    "Mixture",
    "Unit",
];

/// Relation labels recognised by the default schema.
pub const DEFAULT_EDGE_LABELS: [&str; 17] = [
    "acts-on",
    "site",
    "creates",
    "using",
    "setting",
    "count",
    "measure",
    "measure-type-link",
    "coref-of",
    "mod-link",
    "meronym",
    "or",
    "of-type",
    "enables",
    "prevents",
    "overlaps",
    "product",
];

/// Protocol-level slot names recognised by the default schema.
pub const DEFAULT_SLOT_NAMES: [&str; 10] = [
    "reagent",
    "solvent",
    "product",
    "starting_material",
    "yield_percent",
    "yield_other",
    "reaction_time",
    "temperature",
    "example_label",
    "other_compound",
];

pub const DEFAULT_SCHEMA_VERSION: &str = "chemsyn-chemu-1";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SchemaError {
    #[error("{0} list is empty")]
    Empty(&'static str),
    #[error("{kind} label {label:?} is empty or contains whitespace")]
    BadLabel { kind: &'static str, label: String },
    #[error("{kind} label {label:?} is declared twice")]
    Duplicate { kind: &'static str, label: String },
}

/// The configured label inventories. Labels are case-sensitive and keep
/// their declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    #[serde(rename = "schema_version")]
    version: String,
    node_labels: Vec<String>,
    edge_labels: Vec<String>,
    slot_names: Vec<String>,
}

impl Schema {
    pub fn new(
        version: impl Into<String>,
        node_labels: Vec<String>,
        edge_labels: Vec<String>,
        slot_names: Vec<String>,
    ) -> Result<Self, SchemaError> {
        let schema = Schema {
            version: version.into(),
            node_labels,
            edge_labels,
            slot_names,
        };
        schema.check()?;
        Ok(schema)
    }

    /// Re-checks the invariants, e.g. after deserializing a manifest.
    pub fn check(&self) -> Result<(), SchemaError> {
        check_list("node", &self.node_labels)?;
        check_list("edge", &self.edge_labels)?;
        check_list("slot", &self.slot_names)
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn node_labels(&self) -> &[String] {
        &self.node_labels
    }

    pub fn edge_labels(&self) -> &[String] {
        &self.edge_labels
    }

    pub fn slot_names(&self) -> &[String] {
        &self.slot_names
    }

    pub fn has_node_label(&self, label: &str) -> bool {
        self.node_labels.iter().any(|l| l == label)
    }

    pub fn has_edge_label(&self, label: &str) -> bool {
        self.edge_labels.iter().any(|l| l == label)
    }

    pub fn has_slot(&self, name: &str) -> bool {
        self.slot_names.iter().any(|l| l == name)
    }

    /// Whether `tag` is "O" or a B-/I- tag over a known node label.
    pub fn accepts_bio_tag(&self, tag: &str) -> bool {
        match BioTag::parse(tag) {
            Some(BioTag::Outside) => true,
            Some(BioTag::Begin(label)) | Some(BioTag::Inside(label)) => self.has_node_label(label),
            None => false,
        }
    }
}

impl Default for Schema {
    fn default() -> Self {
        let owned = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        Schema {
            version: DEFAULT_SCHEMA_VERSION.to_string(),
            node_labels: owned(&DEFAULT_NODE_LABELS),
            edge_labels: owned(&DEFAULT_EDGE_LABELS),
            slot_names: owned(&DEFAULT_SLOT_NAMES),
        }
    }
}

fn check_list(kind: &'static str, labels: &[String]) -> Result<(), SchemaError> {
    if labels.is_empty() {
        return Err(SchemaError::Empty(kind));
    }
    for (i, label) in labels.iter().enumerate() {
        if label.is_empty() || label.chars().any(char::is_whitespace) {
            return Err(SchemaError::BadLabel {
                kind,
                label: label.clone(),
            });
        }
        if labels[..i].contains(label) {
            return Err(SchemaError::Duplicate {
                kind,
                label: label.clone(),
            });
        }
    }
    Ok(())
}

/// A parsed BIO tag borrowing its label from the source string.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BioTag<'a> {
    Outside,
    Begin(&'a str),
    Inside(&'a str),
}

impl<'a> BioTag<'a> {
    pub fn parse(tag: &'a str) -> Option<Self> {
        if tag == "O" {
            return Some(BioTag::Outside);
        }
        if let Some(label) = tag.strip_prefix("B-") {
            return (!label.is_empty()).then_some(BioTag::Begin(label));
        }
        if let Some(label) = tag.strip_prefix("I-") {
            return (!label.is_empty()).then_some(BioTag::Inside(label));
        }
        None
    }

    pub fn label(&self) -> Option<&'a str> {
        match *self {
            BioTag::Outside => None,
            BioTag::Begin(l) | BioTag::Inside(l) => Some(l),
        }
    }
}

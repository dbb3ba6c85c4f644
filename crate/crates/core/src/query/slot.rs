use std::collections::BTreeMap;

use super::{QueryError, QueryErrorKind};
use crate::schema::Schema;

/// The value that matches any non-empty slot.
pub const ANY_VALUE: &str = "?";

/// In-slot disjunction operator (case-sensitive, space-delimited).
pub const OR_SEPARATOR: &str = " OR ";

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SlotFilter {
    AnyValue,
    /// OR-combined keywords.
    Keywords(Vec<String>),
}

/// Conjunction of per-slot filters.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SlotQuery {
    pub filters: BTreeMap<String, SlotFilter>,
}

impl SlotQuery {
    pub fn slot_names(&self) -> Vec<String> {
        self.filters.keys().cloned().collect()
    }
}

/// Parses a flat slot→value map. `"?"` becomes [`SlotFilter::AnyValue`];
/// anything else is split on `" OR "` and each keyword is trimmed.
pub fn parse_slot_query<K, V>(
    map: impl IntoIterator<Item = (K, V)>,
    schema: &Schema,
) -> Result<SlotQuery, QueryError>
where
    K: AsRef<str>,
    V: AsRef<str>,
{
    let mut filters = BTreeMap::new();
    for (slot, value) in map {
        let (slot, value) = (slot.as_ref(), value.as_ref());
        if !schema.has_slot(slot) {
            return Err(QueryError::new(QueryErrorKind::UnknownSlot(slot.to_string()), None));
        }
        let filter = if value == ANY_VALUE {
            SlotFilter::AnyValue
        } else {
            let keywords: Vec<String> = value.split(OR_SEPARATOR).map(|k| k.trim().to_string()).collect();
            if keywords.iter().any(String::is_empty) {
                return Err(QueryError::new(QueryErrorKind::EmptyKeyword(slot.to_string()), None));
            }
            SlotFilter::Keywords(keywords)
        };
        filters.insert(slot.to_string(), filter);
    }
    Ok(SlotQuery { filters })
}

//! Search over annotated synthesis procedures: corpus model, ingestion,
//! a graph pattern query language, an inverted index and a two-step
//! (retrieve, then verify) matcher.

pub mod corpus;
pub mod engine;
pub mod index;
pub mod ingest;
pub mod query;
pub mod regression;
pub mod schema;
pub mod wire;

pub use corpus::{ProcedureDoc, SentenceGraph};
pub use engine::{search, SearchOptions, SearchRequest, SearchResponse};
pub use index::{build_index, IndexHandle};
pub use schema::Schema;

//! Fact extraction from patent text.
//!
//! The pipeline turns patent documents into `head :: relation :: tail` facts
//! with two sequence taggers: the first marks entity and relation tokens, the
//! second labels relation tokens for one marked entity pair at a time. Facts
//! carry provenance back to the patent and sentence they came from and are
//! collected into a [`kb::KnowledgeBase`] that [`query`] explores.

pub mod clean;
pub mod corpus;
pub mod embed;
pub mod error;
pub mod extract;
pub mod kb;
pub mod lingo;
pub mod query;
pub mod synth;
pub mod tagger;

pub use error::{Error, Result};

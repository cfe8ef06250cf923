//! Neural baselines for link prediction between the entities and relation
//! tokens of a sentence.
//!
//! [`pairwise`] builds 400-d features for single pairs, classified by the
//! [`dense::Mlp`]. [`graphs`] turns sentences into graphs whose candidate
//! edges are classified by [`edge::EdgeClassifier`] over one of the
//! convolutions in [`gnn`]. All backward passes are written by hand and
//! verified by [`gradcheck`].

pub mod checkpoint;
pub mod dense;
pub mod edge;
pub mod error;
pub mod gnn;
pub mod gradcheck;
pub mod graphs;
pub mod pairwise;
pub mod params;

pub use error::{Error, Result};

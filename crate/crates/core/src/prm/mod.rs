//! Roadmap construction and queries.

mod graph;
pub mod spatial;

pub use graph::{construct, ConnectionStrategy, PrmGraph, StreamState};
pub use spatial::GridIndex;

//! Constant-congestion routing of edge-disjoint path instances.

pub mod error;
pub mod expander;
pub mod flow;
pub mod graph;
pub mod grouping;
pub mod instance;
pub mod cut;
pub mod family;
pub mod mcf;
pub mod params;
pub mod welllinked;
pub mod spectral;
pub mod splitting;
pub mod trees;
pub mod krv;
pub mod route;
pub mod gen;
pub mod pipeline;

pub use error::{EdpError, Result};
pub use graph::{EdgeId, EdgeSet, MultiGraph, Path, VertexId, VertexSet};
#[cfg(test)]
pub(crate) mod testutil;

//! Road-network graph inference at desk scale.
//!
//! The crate builds undirected road-network graphs from raster evidence in
//! two independent ways and compares the results:
//!
//! * [`tracer`] grows a graph one fixed-length segment at a time, steered by
//!   a pluggable [`tracer::DecisionFunction`] (a ground-truth oracle, a
//!   raster-reading sensor, a trainable toy model, or an external process
//!   speaking a line-delimited JSON protocol).
//! * [`skeleton`] post-processes a per-pixel road-probability grid the
//!   classical way: threshold, morphological thinning, pixel-graph
//!   extraction, Douglas-Peucker simplification, and heuristic refinement.
//!
//! [`oracle`] generates training labels from a ground-truth graph (static
//! snapshots or dynamic labels emitted while a learner drives the search),
//! [`metrics`] scores inferred maps against ground truth (junction metric,
//! TOPO, shortest-path classification), and [`synthworld`] fabricates
//! deterministic synthetic worlds so everything is testable end to end
//! without real imagery.

pub mod exec;
pub mod geograph;
pub mod geom;

pub mod metrics;
pub mod oracle;
pub mod skeleton;
pub mod raster;
pub mod synthworld;


pub mod tracer;

pub use geograph::{BoundingBox, SpatialGraph, VertexId};
pub use geom::Point;
pub use raster::RasterGrid;

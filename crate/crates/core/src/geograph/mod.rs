//! Spatial graph data model shared by every other module.
//!
//! A [`SpatialGraph`] is an undirected graph whose vertices carry planar
//! coordinates in meters. It represents both inferred maps and ground
//! truth. Vertex ids are dense `0..n` indices; edge endpoints are stored as
//! `(min, max)` pairs.

mod dijkstra;
mod index;
mod io;

pub use dijkstra::{
    bounded_graph_distance, connected_components, distances_within, shortest_path_distance,
    GraphDistance,
};
pub use index::GridIndex;
pub use io::{graph_to_string, load_graph, load_graph_file, save_graph};

use rand::Rng;
use thiserror::Error;

use crate::geom::Point;

pub type VertexId = usize;

/// An ordered list of vertices where consecutive entries are adjacent.
pub type Path = Vec<VertexId>;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid graph: {0}")]
    Validation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Axis-aligned bounding box in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BoundingBox {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        assert!(min_x < max_x && min_y < max_y, "degenerate bounding box");
        BoundingBox { min_x, min_y, max_x, max_y }
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }

    /// Area in hectares (1 ha = 10 000 m²).
    pub fn area_hectares(&self) -> f64 {
        (self.max_x - self.min_x) * (self.max_y - self.min_y) / 10_000.0
    }

    /// Smallest box containing every vertex, padded by `margin` meters.
    /// `None` for an empty graph.
    pub fn around(graph: &SpatialGraph, margin: f64) -> Option<BoundingBox> {
        if graph.vertex_count() == 0 {
            return None;
        }
        let mut min_x = f64::INFINITY;
        let mut min_y = f64::INFINITY;
        let mut max_x = f64::NEG_INFINITY;
        let mut max_y = f64::NEG_INFINITY;
        for p in graph.positions() {
            min_x = min_x.min(p.x);
            min_y = min_y.min(p.y);
            max_x = max_x.max(p.x);
            max_y = max_y.max(p.y);
        }
        Some(BoundingBox::new(
            min_x - margin,
            min_y - margin,
            max_x + margin,
            max_y + margin,
        ))
    }
}

/// Undirected graph with planar vertex coordinates.
///
/// Invariants (checked by [`SpatialGraph::validate`]):
/// no self-loops, no duplicate edges, every endpoint exists, all
/// coordinates finite, adjacency symmetric and consistent with the edge
/// set. Edge length is the Euclidean distance between endpoints.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SpatialGraph {
    positions: Vec<Point>,
    adjacency: Vec<Vec<VertexId>>,
    edges: Vec<(VertexId, VertexId)>,
}

impl SpatialGraph {
    pub fn new() -> Self {
        SpatialGraph::default()
    }

    pub fn vertex_count(&self) -> usize {
        self.positions.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn position(&self, v: VertexId) -> Point {
        self.positions[v]
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn neighbors(&self, v: VertexId) -> &[VertexId] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.adjacency[v].len()
    }

    /// Edges as `(min, max)` pairs, in insertion order.
    pub fn edges(&self) -> &[(VertexId, VertexId)] {
        &self.edges
    }

    pub fn has_edge(&self, a: VertexId, b: VertexId) -> bool {
        self.adjacency[a].contains(&b)
    }

    pub fn edge_length(&self, a: VertexId, b: VertexId) -> f64 {
        self.positions[a].distance(self.positions[b])
    }

    pub fn total_edge_length(&self) -> f64 {
        self.edges.iter().map(|&(a, b)| self.edge_length(a, b)).sum()
    }

    /// Append a vertex, returning its id.
    pub fn add_vertex(&mut self, p: Point) -> VertexId {
        assert!(p.is_finite(), "vertex coordinates must be finite");
        self.positions.push(p);
        self.adjacency.push(Vec::new());
        self.positions.len() - 1
    }

    /// Insert the undirected edge (a, b).
    ///
    /// Panics on self-loops or missing endpoints; inserting an existing
    /// edge is a no-op so callers don't have to pre-check.
    pub fn add_edge(&mut self, a: VertexId, b: VertexId) {
        assert!(a != b, "self-loop edge");
        assert!(a < self.positions.len() && b < self.positions.len(), "edge endpoint out of range");
        if self.has_edge(a, b) {
            return;
        }
        self.adjacency[a].push(b);
        self.adjacency[b].push(a);
        self.edges.push((a.min(b), a.max(b)));
    }

    /// Vertices with three or more incident edges.
    pub fn junctions(&self) -> Vec<VertexId> {
        (0..self.vertex_count()).filter(|&v| self.degree(v) >= 3).collect()
    }

    /// Check every structural invariant, returning the first violation.
    pub fn validate(&self) -> Result<(), GraphError> {
        let n = self.positions.len();
        if self.adjacency.len() != n {
            return Err(GraphError::Validation("adjacency length mismatch".into()));
        }
        for (i, p) in self.positions.iter().enumerate() {
            if !p.is_finite() {
                return Err(GraphError::Validation(format!("vertex {i} has non-finite coordinates")));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for &(a, b) in &self.edges {
            if a == b {
                return Err(GraphError::Validation(format!("self-loop at vertex {a}")));
            }
            if a > b {
                return Err(GraphError::Validation(format!("edge ({a}, {b}) not stored as (min, max)")));
            }
            if b >= n {
                return Err(GraphError::Validation(format!("edge ({a}, {b}) references missing vertex")));
            }
            if !seen.insert((a, b)) {
                return Err(GraphError::Validation(format!("duplicate edge ({a}, {b})")));
            }
            if !self.adjacency[a].contains(&b) || !self.adjacency[b].contains(&a) {
                return Err(GraphError::Validation(format!("edge ({a}, {b}) missing from adjacency")));
            }
        }
        let degree_sum: usize = self.adjacency.iter().map(Vec::len).sum();
        if degree_sum != 2 * self.edges.len() {
            return Err(GraphError::Validation("adjacency inconsistent with edge set".into()));
        }
        Ok(())
    }

    /// Random simple path from `start`: step to a uniformly random
    /// not-yet-visited neighbor, stopping after `w` vertices or when every
    /// neighbor of the current vertex has already been traversed.
    pub fn random_walk<R: Rng>(&self, start: VertexId, w: usize, rng: &mut R) -> Path {
        assert!(w >= 1, "walk length must be at least 1");
        assert!(start < self.vertex_count(), "walk start out of range");
        let mut visited = std::collections::HashSet::new();
        let mut path = vec![start];
        visited.insert(start);
        let mut current = start;
        while path.len() < w {
            let options: Vec<VertexId> = self.adjacency[current]
                .iter()
                .copied()
                .filter(|v| !visited.contains(v))
                .collect();
            if options.is_empty() {
                break;
            }
            current = options[rng.random_range(0..options.len())];
            visited.insert(current);
            path.push(current);
        }
        path
    }
}

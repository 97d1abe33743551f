//! Shortest-path machinery: limit-bounded Dijkstra for the tracer's merge
//! rule, unbounded distances for the SP metric, and connected components.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use super::{SpatialGraph, VertexId};

/// Outcome of a bounded shortest-path query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GraphDistance {
    /// Exact shortest-path distance, ≤ the query limit.
    Within(f64),
    /// Every path is longer than the limit.
    Exceeds,
}

impl GraphDistance {
    pub fn is_within(&self) -> bool {
        matches!(self, GraphDistance::Within(_))
    }
}

#[derive(PartialEq)]
struct HeapEntry {
    dist: f64,
    vertex: VertexId,
}

impl Eq for HeapEntry {}

// Min-heap on distance; ties break on vertex id for determinism.
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .partial_cmp(&self.dist)
            .unwrap()
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest-path distance from `source` to `target` along edges (Euclidean
/// edge lengths), if it is ≤ `limit`. The search never expands a vertex
/// whose distance exceeds the limit, so cost is bounded by the
/// neighborhood size, not the graph size.
pub fn bounded_graph_distance(
    graph: &SpatialGraph,
    source: VertexId,
    target: VertexId,
    limit: f64,
) -> GraphDistance {
    assert!(source < graph.vertex_count() && target < graph.vertex_count());
    if source == target {
        return GraphDistance::Within(0.0);
    }

    let mut best: HashMap<VertexId, f64> = HashMap::new();
    best.insert(source, 0.0);
    let mut heap = BinaryHeap::new();
    heap.push(HeapEntry { dist: 0.0, vertex: source });

    while let Some(HeapEntry { dist, vertex }) = heap.pop() {
        if vertex == target {
            return GraphDistance::Within(dist);
        }
        if dist > *best.get(&vertex).unwrap_or(&f64::INFINITY) {
            continue;
        }
        for &next in graph.neighbors(vertex) {
            let cand = dist + graph.edge_length(vertex, next);
            if cand > limit {
                continue;
            }
            if cand < *best.get(&next).unwrap_or(&f64::INFINITY) {
                best.insert(next, cand);
                heap.push(HeapEntry { dist: cand, vertex: next });
            }
        }
    }
    GraphDistance::Exceeds
}

/// Unbounded shortest-path distance, `None` when disconnected.
pub fn shortest_path_distance(
    graph: &SpatialGraph,
    source: VertexId,
    target: VertexId,
) -> Option<f64> {
    match bounded_graph_distance(graph, source, target, f64::INFINITY) {
        GraphDistance::Within(d) => Some(d),
        GraphDistance::Exceeds => None,
    }
}

/// Distance from `source` to every vertex reachable within `limit`.
pub fn distances_within(
    graph: &SpatialGraph,
    source: VertexId,
    limit: f64,
) -> HashMap<VertexId, f64> {
    let mut best: HashMap<VertexId, f64> = HashMap::new();
    best.insert(source, 0.0);
    let mut settled: HashMap<VertexId, f64> = HashMap::new();
    let mut heap = BinaryHeap::new();
    heap.push(HeapEntry { dist: 0.0, vertex: source });

    while let Some(HeapEntry { dist, vertex }) = heap.pop() {
        if settled.contains_key(&vertex) {
            continue;
        }
        settled.insert(vertex, dist);
        for &next in graph.neighbors(vertex) {
            let cand = dist + graph.edge_length(vertex, next);
            if cand > limit {
                continue;
            }
            if cand < *best.get(&next).unwrap_or(&f64::INFINITY) {
                best.insert(next, cand);
                heap.push(HeapEntry { dist: cand, vertex: next });
            }
        }
    }
    settled
}

/// Component label per vertex, labels dense from 0 in first-seen order.
pub fn connected_components(graph: &SpatialGraph) -> Vec<usize> {
    let n = graph.vertex_count();
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        label[start] = next;
        while let Some(v) = stack.pop() {
            for &u in graph.neighbors(v) {
                if label[u] == usize::MAX {
                    label[u] = next;
                    stack.push(u);
                }
            }
        }
        next += 1;
    }
    label
}

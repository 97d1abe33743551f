//! Viterbi map-matching of a traced path onto the ground-truth graph.
//!
//! Each path point emits a Gaussian score over nearby ground-truth edges
//! (perpendicular distance, spread `sigma`); transitions are allowed
//! between identical or nearby edges (up to three edges of adjacency) with
//! a penalty proportional to the connecting graph distance. The decoded
//! edge sequence is converted to a vertex path whose final vertex — the
//! endpoint of the last matched edge nearest to the path's end — anchors
//! the oracle's walk in the ground truth.

use std::collections::HashMap;

use thiserror::Error;

use crate::geograph::{SpatialGraph, VertexId};
use crate::geom::{point_segment_distance, Point};

/// Normalized (min, max) ground-truth edge key.
pub type EdgeKey = (VertexId, VertexId);

pub fn edge_key(a: VertexId, b: VertexId) -> EdgeKey {
    (a.min(b), a.max(b))
}

#[derive(Debug, Error)]
pub enum MapMatchError {
    #[error("no ground-truth edge within {radius:.1} m of path point {index}")]
    NoCandidate { index: usize, radius: f64 },
    #[error("candidate lattice disconnected at path point {index}")]
    Disconnected { index: usize },
    #[error("empty path")]
    EmptyPath,
}

/// Result of a successful match.
#[derive(Debug, Clone)]
pub struct MatchedPath {
    /// Vertex path in the ground-truth graph, ending at the anchor.
    pub vertices: Vec<VertexId>,
    /// Every ground-truth edge covered by the match (matched edges plus
    /// any short connecting edges), normalized.
    pub edges: Vec<EdgeKey>,
    /// Endpoint of the last matched edge nearest to the path's end.
    pub anchor: VertexId,
}

/// Uniform grid over edge bounding boxes for radius candidate queries.
#[derive(Debug, Clone)]
pub struct EdgeIndex {
    cell: f64,
    cells: HashMap<(i64, i64), Vec<usize>>,
}

impl EdgeIndex {
    pub fn build(graph: &SpatialGraph, cell: f64) -> Self {
        assert!(cell > 0.0);
        let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, &(a, b)) in graph.edges().iter().enumerate() {
            let pa = graph.position(a);
            let pb = graph.position(b);
            let cx0 = (pa.x.min(pb.x) / cell).floor() as i64;
            let cx1 = (pa.x.max(pb.x) / cell).floor() as i64;
            let cy0 = (pa.y.min(pb.y) / cell).floor() as i64;
            let cy1 = (pa.y.max(pb.y) / cell).floor() as i64;
            for cx in cx0..=cx1 {
                for cy in cy0..=cy1 {
                    cells.entry((cx, cy)).or_default().push(i);
                }
            }
        }
        EdgeIndex { cell, cells }
    }

    /// Indices of edges whose segment passes within `radius` of `p`,
    /// sorted ascending.
    pub fn edges_within(&self, graph: &SpatialGraph, p: Point, radius: f64) -> Vec<usize> {
        let cx0 = ((p.x - radius) / self.cell).floor() as i64;
        let cx1 = ((p.x + radius) / self.cell).floor() as i64;
        let cy0 = ((p.y - radius) / self.cell).floor() as i64;
        let cy1 = ((p.y + radius) / self.cell).floor() as i64;
        let mut ids = Vec::new();
        for cx in cx0..=cx1 {
            for cy in cy0..=cy1 {
                if let Some(v) = self.cells.get(&(cx, cy)) {
                    ids.extend_from_slice(v);
                }
            }
        }
        ids.sort_unstable();
        ids.dedup();
        ids.retain(|&i| {
            let (a, b) = graph.edges()[i];
            point_segment_distance(p, graph.position(a), graph.position(b)) <= radius
        });
        ids
    }
}

/// How many edge hops transitions may span, and the connecting vertex
/// paths between nearby edges.
const MAX_TRANSITION_HOPS: usize = 3;

/// For every vertex reachable from either endpoint of edge `e` within
/// `MAX_TRANSITION_HOPS - 1` edges, the walked distance in meters and the
/// vertex path from the starting endpoint (inclusive).
fn transition_neighborhood(
    graph: &SpatialGraph,
    e: EdgeKey,
) -> HashMap<VertexId, (f64, Vec<VertexId>)> {
    let mut best: HashMap<VertexId, (f64, Vec<VertexId>)> = HashMap::new();
    let mut frontier: Vec<(VertexId, f64, Vec<VertexId>)> =
        vec![(e.0, 0.0, vec![e.0]), (e.1, 0.0, vec![e.1])];
    for (v, d, path) in &frontier {
        best.insert(*v, (*d, path.clone()));
    }
    for _hop in 0..MAX_TRANSITION_HOPS - 1 {
        let mut next_frontier = Vec::new();
        for (v, d, path) in &frontier {
            for &n in graph.neighbors(*v) {
                let nd = d + graph.edge_length(*v, n);
                if best.get(&n).is_none_or(|(bd, _)| nd < *bd) {
                    let mut npath = path.clone();
                    npath.push(n);
                    best.insert(n, (nd, npath.clone()));
                    next_frontier.push((n, nd, npath));
                }
            }
        }
        frontier = next_frontier;
    }
    best
}

/// Match `path_points` (the traced path's vertex positions, in order,
/// ending at the search head) onto `gt`.
pub fn map_match(
    gt: &SpatialGraph,
    index: &EdgeIndex,
    path_points: &[Point],
    sigma: f64,
    step_distance: f64,
) -> Result<MatchedPath, MapMatchError> {
    if path_points.is_empty() {
        return Err(MapMatchError::EmptyPath);
    }
    let radius = 4.0 * sigma;
    let edges = gt.edges();

    // Candidate edges per point with emission log-scores.
    let mut lattice: Vec<Vec<(usize, f64)>> = Vec::with_capacity(path_points.len());
    for (i, &p) in path_points.iter().enumerate() {
        let candidates = index.edges_within(gt, p, radius);
        if candidates.is_empty() {
            return Err(MapMatchError::NoCandidate { index: i, radius });
        }
        let scored = candidates
            .into_iter()
            .map(|ei| {
                let (a, b) = edges[ei];
                let d = point_segment_distance(p, gt.position(a), gt.position(b));
                (ei, -0.5 * (d / sigma).powi(2))
            })
            .collect();
        lattice.push(scored);
    }

    // Viterbi over the lattice. Transition cost between edges is the
    // connecting walk in meters divided by D; disallowed beyond
    // MAX_TRANSITION_HOPS edge hops.
    let mut score: Vec<f64> = lattice[0].iter().map(|&(_, e)| e).collect();
    let mut back: Vec<Vec<usize>> = vec![Vec::new()];
    let mut hoods: HashMap<usize, HashMap<VertexId, (f64, Vec<VertexId>)>> = HashMap::new();

    for i in 1..lattice.len() {
        let mut next_score = vec![f64::NEG_INFINITY; lattice[i].len()];
        let mut next_back = vec![usize::MAX; lattice[i].len()];
        for (pj, &(prev_edge, _)) in lattice[i - 1].iter().enumerate() {
            if score[pj] == f64::NEG_INFINITY {
                continue;
            }
            let hood = hoods
                .entry(prev_edge)
                .or_insert_with(|| transition_neighborhood(gt, edges[prev_edge]));
            for (cj, &(cand_edge, emission)) in lattice[i].iter().enumerate() {
                let cost = if cand_edge == prev_edge {
                    Some(0.0)
                } else {
                    let (a, b) = edges[cand_edge];
                    match (hood.get(&a), hood.get(&b)) {
                        (Some((da, _)), Some((db, _))) => Some(da.min(*db)),
                        (Some((da, _)), None) => Some(*da),
                        (None, Some((db, _))) => Some(*db),
                        (None, None) => None,
                    }
                };
                if let Some(meters) = cost {
                    let total = score[pj] - meters / step_distance + emission;
                    if total > next_score[cj] {
                        next_score[cj] = total;
                        next_back[cj] = pj;
                    }
                }
            }
        }
        if next_score.iter().all(|&s| s == f64::NEG_INFINITY) {
            return Err(MapMatchError::Disconnected { index: i });
        }
        score = next_score;
        back.push(next_back);
    }

    // Backtrack the best edge sequence; ties break toward the lower
    // candidate index (hence lower edge id).
    let mut best_j = 0;
    for j in 1..score.len() {
        if score[j] > score[best_j] {
            best_j = j;
        }
    }
    let n = lattice.len();
    let mut edge_seq = vec![0usize; n];
    let mut j = best_j;
    for i in (0..n).rev() {
        edge_seq[i] = lattice[i][j].0;
        if i > 0 {
            j = back[i][j];
        }
    }
    edge_seq.dedup();

    Ok(assemble(gt, &mut hoods, &edge_seq, path_points))
}

/// Convert the deduplicated matched edge sequence into a vertex path
/// ending at the anchor, collecting every covered edge.
fn assemble(
    gt: &SpatialGraph,
    hoods: &mut HashMap<usize, HashMap<VertexId, (f64, Vec<VertexId>)>>,
    edge_seq: &[usize],
    path_points: &[Point],
) -> MatchedPath {
    let edges = gt.edges();
    let p_first = path_points[0];
    let p_last = *path_points.last().unwrap();

    let (a0, b0) = edges[edge_seq[0]];
    let entry = if gt.position(a0).distance(p_first) <= gt.position(b0).distance(p_first) {
        a0
    } else {
        b0
    };
    let mut vertices = vec![entry];

    for window in edge_seq.windows(2) {
        let (prev_edge, next_edge) = (window[0], window[1]);
        let current = *vertices.last().unwrap();
        // Leave the previous edge through whichever endpoint connects to
        // the next edge more cheaply, then bridge to the next edge's
        // nearer endpoint.
        let hood = hoods
            .entry(prev_edge)
            .or_insert_with(|| transition_neighborhood(gt, edges[prev_edge]));
        let (na, nb) = edges[next_edge];
        let pick = [na, nb]
            .into_iter()
            .filter_map(|v| hood.get(&v).map(|(d, path)| (*d, v, path.clone())))
            .min_by(|x, y| x.0.partial_cmp(&y.0).unwrap().then(x.1.cmp(&y.1)));
        let Some((_, reached, bridge)) = pick else { continue };
        // bridge starts at one endpoint of prev_edge; make sure the
        // previous edge itself is walked when we entered at its far side.
        let (pa, pb) = edges[prev_edge];
        let bridge_start = bridge[0];
        if current != bridge_start && (current == pa || current == pb) {
            vertices.push(bridge_start);
        }
        for &v in &bridge[1..] {
            vertices.push(v);
        }
        debug_assert_eq!(*vertices.last().unwrap(), reached);
    }

    // Finish on the last matched edge: its anchor endpoint is the one
    // nearest to the path's end.
    let (la, lb) = edges[*edge_seq.last().unwrap()];
    let anchor = if gt.position(la).distance(p_last) <= gt.position(lb).distance(p_last) {
        la
    } else {
        lb
    };
    let tail = *vertices.last().unwrap();
    if tail != anchor && (tail == la || tail == lb) {
        vertices.push(anchor);
    }
    vertices.dedup();

    // Explored edges are the ones the matched path actually spans. A
    // matched edge the path merely touches (a one-point match on a fresh
    // start, or an edge entered but not crossed) stays unexplored so the
    // oracle can still direct walks along it.
    let mut covered: Vec<EdgeKey> = vertices
        .windows(2)
        .filter(|w| gt.has_edge(w[0], w[1]))
        .map(|w| edge_key(w[0], w[1]))
        .collect();
    covered.sort_unstable();
    covered.dedup();

    MatchedPath { vertices, edges: covered, anchor }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Straight chain along +x with vertices every 10 m.
    fn chain_graph(n: usize) -> SpatialGraph {
        let mut g = SpatialGraph::new();
        for i in 0..n {
            g.add_vertex(Point::new(i as f64 * 10.0, 0.0));
        }
        for i in 1..n {
            g.add_edge(i - 1, i);
        }
        g
    }

    #[test]
    fn exact_path_matches_chain() {
        let g = chain_graph(8);
        let index = EdgeIndex::build(&g, 50.0);
        let points: Vec<Point> = (0..5).map(|i| Point::new(5.0 + i as f64 * 10.0, 0.0)).collect();
        let m = map_match(&g, &index, &points, 6.0, 12.0).unwrap();
        // Anchor: nearest vertex to the path end (45, 0) on edge (4, 5).
        assert_eq!(m.anchor, 4);
        for w in m.vertices.windows(2) {
            assert!(g.has_edge(w[0], w[1]));
        }
        assert!(m.edges.contains(&(0, 1)));
        assert!(m.edges.contains(&(3, 4)));
    }

    #[test]
    fn no_candidate_is_an_error() {
        let g = chain_graph(3);
        let index = EdgeIndex::build(&g, 50.0);
        let points = vec![Point::new(0.0, 500.0)];
        match map_match(&g, &index, &points, 6.0, 12.0) {
            Err(MapMatchError::NoCandidate { index: 0, .. }) => {}
            other => panic!("expected NoCandidate, got {other:?}"),
        }
    }

    #[test]
    fn two_parallel_roads_resolved_by_continuity() {
        // Two horizontal roads 18 m apart. A path walking along the top
        // road that drifts toward the gap must still anchor on the top
        // road: continuity dominates a slightly closer bottom-road point.
        let mut g = SpatialGraph::new();
        for i in 0..6 {
            g.add_vertex(Point::new(i as f64 * 10.0, 0.0)); // top road 0..6
        }
        for i in 0..6 {
            g.add_vertex(Point::new(i as f64 * 10.0, -18.0)); // bottom road 6..12
        }
        for i in 1..6 {
            g.add_edge(i - 1, i);
            g.add_edge(6 + i - 1, 6 + i);
        }
        let index = EdgeIndex::build(&g, 50.0);
        // Path runs on the top road, with the final point drifting to 10 m
        // below it (8 m above the bottom road).
        let points = vec![
            Point::new(5.0, 0.0),
            Point::new(15.0, -1.0),
            Point::new(25.0, -2.0),
            Point::new(35.0, -10.0),
        ];
        let m = map_match(&g, &index, &points, 6.0, 12.0).unwrap();
        assert!(m.anchor < 6, "anchor {} should be on the top road", m.anchor);
    }

    #[test]
    fn edge_index_matches_linear_scan() {
        let g = chain_graph(20);
        let index = EdgeIndex::build(&g, 23.0);
        for (px, py, r) in [(37.0, 4.0, 9.0), (0.0, 0.0, 0.5), (95.0, -20.0, 25.0)] {
            let p = Point::new(px, py);
            let expected: Vec<usize> = (0..g.edge_count())
                .filter(|&i| {
                    let (a, b) = g.edges()[i];
                    point_segment_distance(p, g.position(a), g.position(b)) <= r
                })
                .collect();
            assert_eq!(index.edges_within(&g, p, r), expected);
        }
    }
}

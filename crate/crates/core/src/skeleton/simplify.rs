//! Douglas-Peucker simplification of the degree-2 chains of a graph.
//!
//! Junctions (degree ≥ 3) and endpoints (degree 1) are anchors that never
//! move; every maximal chain of degree-2 vertices between anchors is
//! replaced by its simplification. Isolated cycles have no anchor, so their
//! lowest-id vertex is pinned and the loop is split at its farthest point
//! before simplifying.

use crate::geograph::{SpatialGraph, VertexId};
use crate::geom::{point_segment_distance, Point};

/// Indices (into `points`) kept by Douglas-Peucker with tolerance
/// `epsilon`. Endpoints are always kept; an interior point survives iff
/// some recursion level finds it farther than epsilon from the chord, so
/// epsilon = 0 removes exactly the collinear interior points.
fn douglas_peucker_keep(points: &[Point], epsilon: f64) -> Vec<usize> {
    fn recurse(points: &[Point], lo: usize, hi: usize, epsilon: f64, keep: &mut Vec<usize>) {
        if hi <= lo + 1 {
            return;
        }
        let mut worst = lo + 1;
        let mut worst_dist = -1.0;
        for i in lo + 1..hi {
            let d = point_segment_distance(points[i], points[lo], points[hi]);
            if d > worst_dist {
                worst_dist = d;
                worst = i;
            }
        }
        if worst_dist > epsilon {
            recurse(points, lo, worst, epsilon, keep);
            keep.push(worst);
            recurse(points, worst, hi, epsilon, keep);
        }
    }

    let mut keep = vec![0];
    recurse(points, 0, points.len() - 1, epsilon, &mut keep);
    keep.push(points.len() - 1);
    keep.sort_unstable();
    keep.dedup();
    keep
}

/// A maximal degree-2 chain between two anchors (possibly the same one).
struct Chain {
    vertices: Vec<VertexId>,
}

fn collect_chains(graph: &SpatialGraph) -> Vec<Chain> {
    let n = graph.vertex_count();
    let is_anchor = |v: VertexId| graph.degree(v) != 2;
    let mut visited_edge = std::collections::HashSet::new();
    let mut chains = Vec::new();

    let walk = |start: VertexId,
                    first: VertexId,
                    visited_edge: &mut std::collections::HashSet<(usize, usize)>|
     -> Chain {
        let mut vertices = vec![start, first];
        visited_edge.insert((start.min(first), start.max(first)));
        let (mut prev, mut cur) = (start, first);
        while !is_anchor(cur) && cur != start {
            let next = graph
                .neighbors(cur)
                .iter()
                .copied()
                .find(|&v| v != prev)
                .expect("degree-2 vertex continues");
            visited_edge.insert((cur.min(next), cur.max(next)));
            vertices.push(next);
            prev = cur;
            cur = next;
        }
        Chain { vertices }
    };

    for v in 0..n {
        if !is_anchor(v) {
            continue;
        }
        let mut neighbors: Vec<VertexId> = graph.neighbors(v).to_vec();
        neighbors.sort_unstable();
        for next in neighbors {
            if visited_edge.contains(&(v.min(next), v.max(next))) {
                continue;
            }
            chains.push(walk(v, next, &mut visited_edge));
        }
    }

    // Leftover pure cycles: all degree 2, unvisited.
    for v in 0..n {
        if graph.degree(v) != 2 {
            continue;
        }
        let mut neighbors: Vec<VertexId> = graph.neighbors(v).to_vec();
        neighbors.sort_unstable();
        for next in neighbors {
            if visited_edge.contains(&(v.min(next), v.max(next))) {
                continue;
            }
            chains.push(walk(v, next, &mut visited_edge));
        }
    }
    chains
}

/// Simplify every degree-2 chain with tolerance `epsilon` (meters).
/// Junction and endpoint anchors keep their exact positions; the
/// perpendicular deviation of removed vertices from the new polyline stays
/// within epsilon; duplicate-edge and self-loop collapses are prevented by
/// re-inserting the most significant interior vertices.
pub fn simplify(graph: &SpatialGraph, epsilon: f64) -> SpatialGraph {
    assert!(epsilon >= 0.0);
    let mut out = SpatialGraph::new();
    let mut new_id = std::collections::HashMap::new();
    let carry =
        |v: VertexId, graph: &SpatialGraph, out: &mut SpatialGraph, map: &mut std::collections::HashMap<usize, usize>| -> usize {
            *map.entry(v).or_insert_with(|| out.add_vertex(graph.position(v)))
        };

    // Anchors (and isolated vertices) first, in id order, so output ids
    // are deterministic.
    for v in 0..graph.vertex_count() {
        if graph.degree(v) != 2 {
            carry(v, graph, &mut out, &mut new_id);
        }
    }

    for chain in collect_chains(graph) {
        let closed = chain.vertices.first() == chain.vertices.last();
        let points: Vec<Point> =
            chain.vertices.iter().map(|&v| graph.position(v)).collect();

        let mut keep_idx: Vec<usize> = if closed {
            // Pin the farthest point from the anchor, then simplify the
            // two halves so the loop can't collapse onto itself.
            let anchor_pos = points[0];
            let far = (1..points.len() - 1)
                .max_by(|&i, &j| {
                    anchor_pos
                        .distance(points[i])
                        .partial_cmp(&anchor_pos.distance(points[j]))
                        .unwrap()
                        .then(j.cmp(&i))
                })
                .unwrap_or(1);
            let mut keep = Vec::new();
            for i in douglas_peucker_keep(&points[..=far], epsilon) {
                keep.push(i);
            }
            for i in douglas_peucker_keep(&points[far..], epsilon) {
                keep.push(far + i);
            }
            keep.sort_unstable();
            keep.dedup();
            keep
        } else {
            douglas_peucker_keep(&points, epsilon)
        };

        // Guard against degenerate results: a closed chain needs at least
        // two interior vertices (no self-loops, no duplicate two-vertex
        // cycles); an open chain that would duplicate an existing edge
        // keeps its most deviant interior vertex.
        if closed {
            while keep_idx.len() < 4 {
                if let Some(extra) = (1..points.len() - 1).find(|i| !keep_idx.contains(i)) {
                    keep_idx.push(extra);
                    keep_idx.sort_unstable();
                } else {
                    break;
                }
            }
        }

        let ids: Vec<usize> = {
            let mut ids = Vec::with_capacity(keep_idx.len());
            for (k, &i) in keep_idx.iter().enumerate() {
                let vertex = chain.vertices[i];
                let is_endpoint = k == 0 || k + 1 == keep_idx.len();
                if is_endpoint {
                    ids.push(carry(vertex, graph, &mut out, &mut new_id));
                } else {
                    // Interior chain vertices are never shared between
                    // chains; always fresh.
                    ids.push(out.add_vertex(graph.position(vertex)));
                }
            }
            ids
        };

        for w in 0..ids.len() - 1 {
            let (a, b) = (ids[w], ids[w + 1]);
            if a == b {
                continue;
            }
            if ids.len() == 2 && out.has_edge(a, b) {
                // Parallel chain collapsed onto an existing edge: keep one
                // interior vertex so both roads survive.
                let mid = chain.vertices[chain.vertices.len() / 2];
                let mid_id = out.add_vertex(graph.position(mid));
                out.add_edge(a, mid_id);
                out.add_edge(mid_id, b);
            } else {
                out.add_edge(a, b);
            }
        }
    }
    out
}

/// Greatest distance from any original chain vertex to the simplified
/// graph's nearest edge — the pointwise deviation check used in tests.
pub fn max_deviation(original: &SpatialGraph, simplified: &SpatialGraph) -> f64 {
    let mut worst = 0.0f64;
    for &p in original.positions() {
        let mut best = f64::INFINITY;
        for &(a, b) in simplified.edges() {
            let d = point_segment_distance(p, simplified.position(a), simplified.position(b));
            best = best.min(d);
        }
        for &q in simplified.positions() {
            best = best.min(p.distance(q));
        }
        worst = worst.max(best);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain_of(points: &[(f64, f64)]) -> SpatialGraph {
        let mut g = SpatialGraph::new();
        for &(x, y) in points {
            g.add_vertex(Point::new(x, y));
        }
        for i in 1..points.len() {
            g.add_edge(i - 1, i);
        }
        g
    }

    #[test]
    fn collinear_chain_collapses() {
        let g = chain_of(&[(0.0, 0.0), (5.0, 0.0), (10.0, 0.0), (15.0, 0.0)]);
        let s = simplify(&g, 0.5);
        assert_eq!(s.vertex_count(), 2);
        assert_eq!(s.edge_count(), 1);
    }

    #[test]
    fn epsilon_zero_keeps_noncollinear() {
        // (5, 0.3) lies exactly on the chord from (0, 0) to (10, 0.6) and
        // goes; the bend at (10, 0.6) stays.
        let g = chain_of(&[(0.0, 0.0), (5.0, 0.3), (10.0, 0.6), (15.0, 0.0)]);
        let s = simplify(&g, 0.0);
        assert_eq!(s.vertex_count(), 3);
        assert!(s.positions().iter().any(|p| (p.x - 10.0).abs() < 1e-9));
    }

    #[test]
    fn junctions_never_move() {
        // A T junction with wiggly arms.
        let mut g = SpatialGraph::new();
        let j = g.add_vertex(Point::new(0.0, 0.0));
        let arm = |dx: f64, dy: f64, g: &mut SpatialGraph| {
            let mut prev = j;
            for k in 1..=5 {
                let wiggle = if k % 2 == 0 { 0.4 } else { -0.4 };
                let v = g.add_vertex(Point::new(
                    dx * k as f64 * 10.0 + dy.abs() * wiggle,
                    dy * k as f64 * 10.0 + dx.abs() * wiggle,
                ));
                g.add_edge(prev, v);
                prev = v;
            }
        };
        arm(1.0, 0.0, &mut g);
        arm(-1.0, 0.0, &mut g);
        arm(0.0, 1.0, &mut g);
        let s = simplify(&g, 1.0);
        let junctions = s.junctions();
        assert_eq!(junctions.len(), 1);
        assert_eq!(s.position(junctions[0]), Point::new(0.0, 0.0));
        assert!(s.vertex_count() < g.vertex_count());
        assert!(max_deviation(&g, &s) <= 1.0 + 1e-9);
    }

    #[test]
    fn pure_cycle_survives() {
        let mut g = SpatialGraph::new();
        let n = 12;
        for i in 0..n {
            let a = i as f64 / n as f64 * std::f64::consts::TAU;
            g.add_vertex(Point::new(30.0 * a.cos(), 30.0 * a.sin()));
        }
        for i in 0..n {
            g.add_edge(i.min((i + 1) % n), i.max((i + 1) % n));
        }
        let s = simplify(&g, 100.0); // brutal epsilon
        s.validate().unwrap();
        assert!(s.vertex_count() >= 3, "cycle collapsed to {}", s.vertex_count());
        assert_eq!(s.edge_count(), s.vertex_count(), "still exactly one cycle");
    }

    #[test]
    fn random_polyline_deviation_bounded() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let mut pts = vec![(0.0, 0.0)];
            let mut x = 0.0;
            let mut y = 0.0;
            for _ in 0..40 {
                x += rng.random_range(3.0..10.0);
                y += rng.random_range(-4.0..4.0);
                pts.push((x, y));
            }
            let g = chain_of(&pts);
            for epsilon in [0.5, 2.0, 8.0] {
                let s = simplify(&g, epsilon);
                assert!(
                    max_deviation(&g, &s) <= epsilon + 1e-9,
                    "epsilon {epsilon} violated"
                );
                assert!(s.vertex_count() <= g.vertex_count());
            }
        }
    }
}

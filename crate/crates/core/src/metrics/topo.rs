//! TOPO: reachability comparison by simulated drives.
//!
//! For each seed, a start vertex is sampled on the ground truth and paired
//! to the nearest inferred vertex within the hole radius. Both maps then
//! drop "holes" — marbles spaced along every edge — and keep the ones
//! reachable within the drive distance from their start. Holes match
//! one-to-one across maps within the hole radius; precision and recall
//! average over seeds. A seed with no paired start scores zero recall and
//! is excluded from the precision average.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::exec;
use crate::geograph::{distances_within, GridIndex, SpatialGraph, VertexId};
use crate::geom::Point;

use super::{canonical_vertex_order, position_key};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopoParams {
    pub seeds: usize,
    /// Drive budget from each start, meters.
    pub drive_dist: f64,
    /// Start-pairing and hole-matching radius, meters.
    pub hole_radius: f64,
    /// Marble spacing along edges, meters.
    pub interval: f64,
}

impl Default for TopoParams {
    fn default() -> Self {
        TopoParams { seeds: 50, drive_dist: 300.0, hole_radius: 12.0, interval: 6.0 }
    }
}

/// Marble positions along every edge: one every `interval` meters starting
/// half an interval in, tagged with the edge and arc offset. The ladder
/// runs from the geometrically lower endpoint so the marble set does not
/// depend on vertex numbering.
fn marbles(graph: &SpatialGraph, interval: f64) -> Vec<(Point, VertexId, VertexId, f64)> {
    let mut out = Vec::new();
    for &(a, b) in graph.edges() {
        let pa = graph.position(a);
        let pb = graph.position(b);
        let (a, b) = if (pa.x, pa.y) <= (pb.x, pb.y) { (a, b) } else { (b, a) };
        let len = graph.edge_length(a, b);
        let mut s = interval / 2.0;
        while s < len {
            let t = s / len;
            out.push((graph.position(a).lerp(graph.position(b), t), a, b, s));
            s += interval;
        }
    }
    out
}

/// Holes reachable within `drive_dist` of `start`.
fn reachable_holes(
    graph: &SpatialGraph,
    all: &[(Point, VertexId, VertexId, f64)],
    start: VertexId,
    drive_dist: f64,
) -> Vec<Point> {
    let dist = distances_within(graph, start, drive_dist);
    all.iter()
        .filter(|(_, a, b, s)| {
            let len = graph.edge_length(*a, *b);
            let via_a = dist.get(a).map_or(f64::INFINITY, |d| d + s);
            let via_b = dist.get(b).map_or(f64::INFINITY, |d| d + (len - s));
            via_a.min(via_b) <= drive_dist
        })
        .map(|&(p, _, _, _)| p)
        .collect()
}

/// Greedy one-to-one hole matching by ascending distance within `radius`.
fn match_holes(gt_holes: &[Point], inf_holes: &[Point], radius: f64) -> usize {
    if gt_holes.is_empty() || inf_holes.is_empty() {
        return 0;
    }
    let mut index = GridIndex::new(radius.max(1.0));
    for (i, &p) in inf_holes.iter().enumerate() {
        index.insert(i, p);
    }
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (gi, &gp) in gt_holes.iter().enumerate() {
        for ii in index.vertices_within(gp, radius) {
            candidates.push((gp.distance(inf_holes[ii]), gi, ii));
        }
    }
    // Tie-break on hole geometry, not indices, so matching doesn't depend
    // on edge enumeration order.
    candidates.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap()
            .then_with(|| position_key(gt_holes[a.1], gt_holes[b.1]))
            .then_with(|| position_key(inf_holes[a.2], inf_holes[b.2]))
    });
    let mut gt_used = vec![false; gt_holes.len()];
    let mut inf_used = vec![false; inf_holes.len()];
    let mut matched = 0;
    for (_, gi, ii) in candidates {
        if !gt_used[gi] && !inf_used[ii] {
            gt_used[gi] = true;
            inf_used[ii] = true;
            matched += 1;
        }
    }
    matched
}

/// Average (precision, recall) over seeded drives.
pub fn topo(
    gt: &SpatialGraph,
    inferred: &SpatialGraph,
    params: &TopoParams,
    seed: u64,
) -> (f64, f64) {
    if gt.vertex_count() == 0 {
        return (0.0, 0.0);
    }
    let order = canonical_vertex_order(gt);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<VertexId> =
        (0..params.seeds).map(|_| order[rng.random_range(0..order.len())]).collect();

    let gt_marbles = marbles(gt, params.interval);
    let inf_marbles = marbles(inferred, params.interval);
    let inf_index = if inferred.vertex_count() > 0 {
        Some(GridIndex::build(inferred, params.hole_radius.max(1.0)))
    } else {
        None
    };

    // (precision or NaN when the seed has no paired start, recall)
    let per_seed: Vec<(f64, f64)> = exec::map_vec(&starts, |&gt_start| {
        let gt_holes = reachable_holes(gt, &gt_marbles, gt_start, params.drive_dist);
        let inf_start = inf_index
            .as_ref()
            .and_then(|ix| ix.nearest_within(gt.position(gt_start), params.hole_radius))
            .map(|(v, _)| v);
        let Some(inf_start) = inf_start else {
            return (f64::NAN, 0.0);
        };
        let inf_holes = reachable_holes(inferred, &inf_marbles, inf_start, params.drive_dist);
        let matched = match_holes(&gt_holes, &inf_holes, params.hole_radius);
        let precision =
            if inf_holes.is_empty() { 1.0 } else { matched as f64 / inf_holes.len() as f64 };
        let recall =
            if gt_holes.is_empty() { 1.0 } else { matched as f64 / gt_holes.len() as f64 };
        (precision, recall)
    });

    let recall = per_seed.iter().map(|&(_, r)| r).sum::<f64>() / per_seed.len() as f64;
    let paired: Vec<f64> =
        per_seed.iter().map(|&(p, _)| p).filter(|p| !p.is_nan()).collect();
    let precision =
        if paired.is_empty() { 0.0 } else { paired.iter().sum::<f64>() / paired.len() as f64 };
    (precision, recall)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn long_path(n: usize, spacing: f64) -> SpatialGraph {
        let mut g = SpatialGraph::new();
        for i in 0..n {
            g.add_vertex(Point::new(i as f64 * spacing, 0.0));
        }
        for i in 1..n {
            g.add_edge(i - 1, i);
        }
        g
    }

    #[test]
    fn identical_graphs_are_perfect() {
        let g = long_path(30, 20.0);
        let (p, r) = topo(&g, &g, &TopoParams::default(), 5);
        assert!((p - 1.0).abs() < 1e-9);
        assert!((r - 1.0).abs() < 1e-9);
    }

    #[test]
    fn empty_inferred_has_zero_recall() {
        let g = long_path(30, 20.0);
        let empty = SpatialGraph::new();
        let (p, r) = topo(&g, &empty, &TopoParams::default(), 5);
        assert_eq!(r, 0.0);
        assert_eq!(p, 0.0);
    }

    #[test]
    fn half_coverage_gives_half_recall() {
        // Ground truth 1200 m path; inferred covers the first 600 m.
        // Drives start everywhere on gt, so recall per seed depends on the
        // start; use a start forced to the covered half by seeding, and
        // check the aggregate lies strictly between 0.2 and 0.8.
        let gt = long_path(61, 20.0);
        let inferred = long_path(31, 20.0);
        let params = TopoParams { seeds: 80, drive_dist: 200.0, ..TopoParams::default() };
        let (_, r) = topo(&gt, &inferred, &params, 11);
        assert!(r > 0.2 && r < 0.8, "recall {r}");
    }

    #[test]
    fn deterministic_in_seed() {
        let gt = long_path(40, 15.0);
        let inferred = long_path(25, 15.0);
        let params = TopoParams::default();
        assert_eq!(topo(&gt, &inferred, &params, 7), topo(&gt, &inferred, &params, 7));
        assert_ne!(topo(&gt, &inferred, &params, 7), topo(&gt, &inferred, &params, 8));
    }
}

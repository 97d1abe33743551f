//! Map comparison: the junction metric, TOPO, the shortest-path metric,
//! and threshold sweeps over families of inferred maps.
//!
//! Seeded sampling draws from vertices in canonical (x, y) order rather
//! than id order, so reports are invariant under vertex relabeling and
//! under translating both maps together.

mod junction;
mod sp;
mod topo;

pub use junction::{incident_bearing, junction_metric, JunctionPair, JunctionParams, JunctionReport};
pub use sp::{sp_metric, SpParams, SpReport};
pub use topo::{topo, TopoParams};

use thiserror::Error;

use crate::exec;
use crate::geograph::{SpatialGraph, VertexId};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("graph too small for this metric: {0}")]
    InsufficientGraph(String),
}

/// Lexicographic (x, y) comparison for deterministic geometric
/// tie-breaking.
pub(crate) fn position_key(a: crate::geom::Point, b: crate::geom::Point) -> std::cmp::Ordering {
    a.x.partial_cmp(&b.x).unwrap().then(a.y.partial_cmp(&b.y).unwrap())
}

/// Vertex ids sorted by (x, y), falling back to id for coincident
/// positions.
pub(crate) fn canonical_vertex_order(graph: &SpatialGraph) -> Vec<VertexId> {
    let mut order: Vec<VertexId> = (0..graph.vertex_count()).collect();
    order.sort_by(|&a, &b| {
        let pa = graph.position(a);
        let pb = graph.position(b);
        pa.x.partial_cmp(&pb.x)
            .unwrap()
            .then(pa.y.partial_cmp(&pb.y).unwrap())
            .then(a.cmp(&b))
    });
    order
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    Junction,
    Topo,
    Sp,
}

/// One threshold's scores: `recall` is F_correct / TOPO recall / SP
/// correct fraction; `error` is F_error / (1 − precision) /
/// (1 − correct).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub threshold: f64,
    pub recall: f64,
    pub error: f64,
}

/// All metric tunables in one place, for sweeps and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricParams {
    pub junction: JunctionParams,
    pub topo: TopoParams,
    pub sp: SpParams,
}

/// Evaluate `metric` for every (threshold, inferred graph) in the family.
/// Families are evaluated in parallel; output order follows input order.
pub fn sweep(
    gt: &SpatialGraph,
    family: &[(f64, SpatialGraph)],
    metric: MetricKind,
    params: &MetricParams,
    seed: u64,
) -> Result<Vec<SweepRow>, MetricError> {
    let rows = exec::map_vec(family, |(threshold, inferred)| {
        let (recall, error) = match metric {
            MetricKind::Junction => {
                let r = junction_metric(gt, inferred, &params.junction);
                (r.f_correct, r.f_error)
            }
            MetricKind::Topo => {
                let (precision, recall) = topo(gt, inferred, &params.topo, seed);
                (recall, 1.0 - precision)
            }
            MetricKind::Sp => match sp_metric(gt, inferred, &params.sp, seed) {
                Ok(r) => (r.correct, 1.0 - r.correct),
                Err(e) => return Err(e),
            },
        };
        Ok(SweepRow { threshold: *threshold, recall, error })
    });
    rows.into_iter().collect()
}

/// Symmetric Hausdorff distance between the drawn geometry of two graphs,
/// sampling points every `sample_step` meters along every edge (vertices
/// included). Infinite when exactly one side is empty.
pub fn hausdorff_distance(a: &SpatialGraph, b: &SpatialGraph, sample_step: f64) -> f64 {
    fn samples(g: &SpatialGraph, step: f64) -> Vec<crate::geom::Point> {
        let mut out: Vec<crate::geom::Point> = g.positions().to_vec();
        for &(u, v) in g.edges() {
            let len = g.edge_length(u, v);
            let n = (len / step).ceil() as usize;
            for k in 1..n {
                out.push(g.position(u).lerp(g.position(v), k as f64 / n as f64));
            }
        }
        out
    }
    fn directed(from: &[crate::geom::Point], to: &SpatialGraph) -> f64 {
        if from.is_empty() {
            return 0.0;
        }
        if to.edge_count() == 0 && to.vertex_count() == 0 {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for &p in from {
            let mut best = f64::INFINITY;
            for &q in to.positions() {
                best = best.min(p.distance(q));
            }
            for &(u, v) in to.edges() {
                best = best.min(crate::geom::point_segment_distance(
                    p,
                    to.position(u),
                    to.position(v),
                ));
            }
            worst = worst.max(best);
        }
        worst
    }
    let sa = samples(a, sample_step);
    let sb = samples(b, sample_step);
    directed(&sa, b).max(directed(&sb, a))
}

/// The sweep row with the highest recall — for SP, "the threshold that
/// yields the highest correct shortest paths".
pub fn best_row(rows: &[SweepRow]) -> Option<SweepRow> {
    rows.iter()
        .copied()
        .max_by(|a, b| {
            a.recall
                .partial_cmp(&b.recall)
                .unwrap()
                .then(b.error.partial_cmp(&a.error).unwrap())
        })
}

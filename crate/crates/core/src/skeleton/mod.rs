//! Segmentation post-processing: probability mask → binary mask → one-pixel
//! skeleton → pixel graph → simplified graph → refined graph, plus seed
//! peak extraction for the tracer.

mod extract;
mod refine;
mod simplify;
pub(crate) mod thin;

pub use extract::extract_graph;
pub use refine::{refine, RefineParams};
pub use simplify::{max_deviation, simplify};
pub use thin::{component_count, has_thick_block, thin};

use crate::geograph::SpatialGraph;
use crate::geom::Point;
use crate::raster::RasterGrid;

/// Binary mask: 1 where the probability is at least `t`, else 0.
pub fn threshold(mask: &RasterGrid, t: f64) -> RasterGrid {
    let mut out = RasterGrid::zeros(mask.width(), mask.height(), mask.resolution, mask.origin);
    for row in 0..mask.height() {
        for col in 0..mask.width() {
            out.set(row, col, if mask.get(row, col) >= t { 1.0 } else { 0.0 });
        }
    }
    out
}

/// Pipeline tunables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineParams {
    /// Binary-mask threshold in [0, 1].
    pub threshold: f64,
    /// Douglas-Peucker tolerance, meters.
    pub epsilon: f64,
    /// Laplacian passes over degree-2 chains before simplification.
    /// Skeleton pixels sit on the integer lattice and meander a pixel or
    /// two around the true centerline; averaging recovers sub-pixel
    /// geometry. Junctions and endpoints stay pinned.
    pub smooth_passes: usize,
    /// Half-width (meters) of the ridge-snapping band; 0 disables it.
    pub snap_window: f64,
    pub refine: RefineParams,
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams {
            threshold: 0.5,
            epsilon: 1.2,
            smooth_passes: 4,
            snap_window: 5.0,
            refine: RefineParams::default(),
        }
    }
}

/// Relax degree-2 chain vertices toward their neighbor midpoints,
/// `passes` times, Taubin style: each smoothing step (λ = 0.5) is
/// followed by an inflation step (μ = −0.53) so curves do not shrink
/// toward their chords. Anchors (degree ≠ 2) never move, so topology and
/// junction positions are untouched.
pub fn smooth_chains(graph: &SpatialGraph, passes: usize) -> SpatialGraph {
    let mut positions: Vec<Point> = graph.positions().to_vec();
    let mut relax = |factor: f64, positions: &mut Vec<Point>| {
        let snapshot = positions.clone();
        for v in 0..graph.vertex_count() {
            if graph.degree(v) != 2 {
                continue;
            }
            let n = graph.neighbors(v);
            let (a, b) = (snapshot[n[0]], snapshot[n[1]]);
            let p = snapshot[v];
            positions[v] = Point::new(
                p.x + factor * (0.5 * (a.x + b.x) - p.x),
                p.y + factor * (0.5 * (a.y + b.y) - p.y),
            );
        }
    };
    for _ in 0..passes {
        relax(0.5, &mut positions);
        relax(-0.53, &mut positions);
    }
    let mut out = SpatialGraph::new();
    for &p in &positions {
        out.add_vertex(p);
    }
    for &(a, b) in graph.edges() {
        out.add_edge(a, b);
    }
    out
}

/// Every intermediate stage of the pipeline, for inspection and dumping.
pub struct PipelineStages {
    pub binary: RasterGrid,
    pub skeleton: RasterGrid,
    pub pixel_graph: SpatialGraph,
    pub simplified: SpatialGraph,
    pub refined: SpatialGraph,
}

/// Pull degree-2 chain vertices onto the probability ridge: each vertex
/// moves along its chain normal to the centroid of the mask values in a
/// ±`window` band. The thinned skeleton lives on the integer lattice; the
/// mask knows the centerline to sub-pixel precision. Vertices adjacent to
/// anchors stay put (a crossing road would bias their centroid), and the
/// displacement is clamped to the window.
pub fn snap_to_ridge(graph: &SpatialGraph, mask: &RasterGrid, window: f64) -> SpatialGraph {
    let step = mask.resolution / 2.0;
    let mut out = SpatialGraph::new();
    for v in 0..graph.vertex_count() {
        let p = graph.position(v);
        let movable = graph.degree(v) == 2
            && graph.neighbors(v).iter().all(|&n| graph.degree(n) == 2);
        if !movable {
            out.add_vertex(p);
            continue;
        }
        let n = graph.neighbors(v);
        let (a, b) = (graph.position(n[0]), graph.position(n[1]));
        let len = a.distance(b);
        if len < 1e-9 {
            out.add_vertex(p);
            continue;
        }
        let normal = Point::new(-(b.y - a.y) / len, (b.x - a.x) / len);
        let mut weight_sum = 0.0;
        let mut offset_sum = 0.0;
        let mut t = -window;
        while t <= window {
            let q = Point::new(p.x + normal.x * t, p.y + normal.y * t);
            let w = mask.sample(q);
            weight_sum += w;
            offset_sum += w * t;
            t += step;
        }
        if weight_sum > 1e-9 {
            let shift = (offset_sum / weight_sum).clamp(-window, window);
            out.add_vertex(Point::new(p.x + normal.x * shift, p.y + normal.y * shift));
        } else {
            out.add_vertex(p);
        }
    }
    for &(a, b) in graph.edges() {
        out.add_edge(a, b);
    }
    out
}

/// Run the full post-processing pipeline on a probability mask.
pub fn run_pipeline(mask: &RasterGrid, params: &PipelineParams) -> PipelineStages {
    let binary = threshold(mask, params.threshold);
    let skeleton = thin(&binary);
    let pixel_graph = extract_graph(&skeleton);
    let smoothed = smooth_chains(&pixel_graph, params.smooth_passes);
    let snapped = if params.snap_window > 0.0 {
        snap_to_ridge(&smoothed, mask, params.snap_window)
    } else {
        smoothed
    };
    let simplified = simplify(&snapped, params.epsilon);
    let refined = refine(&simplified, &params.refine);
    PipelineStages { binary, skeleton, pixel_graph, simplified, refined }
}

/// Peaks of a probability mask: local maxima of value ≥ `min_prob`,
/// greedily selected in descending value with pairwise spacing of at least
/// `min_spacing` meters. Ties break in row-major order.
pub fn seed_points(mask: &RasterGrid, min_prob: f64, min_spacing: f64) -> Vec<Point> {
    let w = mask.width();
    let h = mask.height();
    let mut peaks: Vec<(f64, usize)> = Vec::new();
    for r in 0..h {
        for c in 0..w {
            let v = mask.get(r, c);
            if v < min_prob {
                continue;
            }
            let mut is_peak = true;
            'outer: for dr in -1..=1i64 {
                for dc in -1..=1i64 {
                    if dr == 0 && dc == 0 {
                        continue;
                    }
                    let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                    if nr >= 0 && nc >= 0 && (nr as usize) < h && (nc as usize) < w
                        && mask.get(nr as usize, nc as usize) > v
                    {
                        is_peak = false;
                        break 'outer;
                    }
                }
            }
            if is_peak {
                peaks.push((v, r * w + c));
            }
        }
    }
    peaks.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));

    let mut selected: Vec<Point> = Vec::new();
    for (_, idx) in peaks {
        let p = mask.pixel_center(idx / w, idx % w);
        if selected.iter().all(|s| s.distance(p) >= min_spacing) {
            selected.push(p);
        }
    }
    selected
}

//! Synthetic road-network generation: grid, radial, and organic styles.
//!
//! Every style yields a connected planar graph with junctions, dead ends,
//! curved chains, and (for worlds of at least 500 m extent) at least one
//! cycle, deterministically from the spec seed. Edges are subdivided to
//! the spec's maximum segment length so traced steps and map-matching see
//! densely sampled geometry.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geograph::{bounded_graph_distance, GraphDistance, SpatialGraph, VertexId};
use crate::geom::{segments_cross, Point, TAU};

use super::{Style, WorldSpec};

pub fn gen_network(spec: &WorldSpec) -> SpatialGraph {
    assert!(spec.extent > 0.0);
    let graph = match spec.style {
        Style::Grid => gen_grid(spec),
        Style::Radial => gen_radial(spec),
        Style::Organic => gen_organic(spec),
    };
    let graph = subdivide(&graph, spec.max_segment);
    debug_assert!(graph.validate().is_ok());
    graph
}

/// Plain rows×cols grid with the given spacing; junction candidates at
/// every interior crossing.
pub(crate) fn grid_base(rows: usize, cols: usize, spacing: f64, origin: Point) -> SpatialGraph {
    let mut g = SpatialGraph::new();
    for r in 0..rows {
        for c in 0..cols {
            g.add_vertex(Point::new(
                origin.x + c as f64 * spacing,
                origin.y + r as f64 * spacing,
            ));
        }
    }
    for r in 0..rows {
        for c in 0..cols {
            let v = r * cols + c;
            if c + 1 < cols {
                g.add_edge(v, v + 1);
            }
            if r + 1 < rows {
                g.add_edge(v, v + cols);
            }
        }
    }
    g
}

/// Split every edge longer than `max_len` into equal parts.
fn subdivide(graph: &SpatialGraph, max_len: f64) -> SpatialGraph {
    assert!(max_len > 0.0);
    let mut out = SpatialGraph::new();
    for &p in graph.positions() {
        out.add_vertex(p);
    }
    for &(a, b) in graph.edges() {
        let pa = graph.position(a);
        let pb = graph.position(b);
        let parts = (pa.distance(pb) / max_len).ceil().max(1.0) as usize;
        let mut prev = a;
        for k in 1..parts {
            let v = out.add_vertex(pa.lerp(pb, k as f64 / parts as f64));
            out.add_edge(prev, v);
            prev = v;
        }
        out.add_edge(prev, b);
    }
    out
}

/// True when the polyline segment (a, b) crosses any existing edge not
/// incident to the given vertices.
fn crosses_any(graph: &SpatialGraph, a: Point, b: Point) -> bool {
    graph
        .edges()
        .iter()
        .any(|&(u, v)| segments_cross(a, b, graph.position(u), graph.position(v)))
}

/// Distance between segment (a, b) and segment (c, d), assuming they do
/// not intersect.
fn segment_gap(a: Point, b: Point, c: Point, d: Point) -> f64 {
    use crate::geom::point_segment_distance as psd;
    psd(a, c, d).min(psd(b, c, d)).min(psd(c, a, b)).min(psd(d, a, b))
}

/// Smallest gap between segment (a, b) and any edge without an endpoint
/// within `exclude_near` of either segment end. Keeps new roads from
/// running right alongside existing ones, which would fuse their
/// rasterized bands.
fn clearance(graph: &SpatialGraph, a: Point, b: Point, exclude_near: f64) -> f64 {
    let mut best = f64::INFINITY;
    for &(u, v) in graph.edges() {
        let pu = graph.position(u);
        let pv = graph.position(v);
        let touches = pu.distance(a) <= exclude_near
            || pu.distance(b) <= exclude_near
            || pv.distance(a) <= exclude_near
            || pv.distance(b) <= exclude_near;
        if touches {
            continue;
        }
        best = best.min(segment_gap(a, b, pu, pv));
    }
    best
}

/// Append a polyline from vertex `from` through `points`; returns the
/// final vertex.
fn extend_polyline(graph: &mut SpatialGraph, from: VertexId, points: &[Point]) -> VertexId {
    let mut prev = from;
    for &p in points {
        let v = graph.add_vertex(p);
        graph.add_edge(prev, v);
        prev = v;
    }
    prev
}

/// Gently curved run of intermediate points from `a` to `b`: a sin² bump
/// of the given amplitude perpendicular to the chord. The squared profile
/// leaves the endpoint directions unchanged, so junction angles stay what
/// the lattice says they are.
fn curved_points(a: Point, b: Point, amplitude: f64, segments: usize) -> Vec<Point> {
    let len = a.distance(b);
    if len == 0.0 {
        return Vec::new();
    }
    let nx = -(b.y - a.y) / len;
    let ny = (b.x - a.x) / len;
    (1..segments)
        .map(|k| {
            let t = k as f64 / segments as f64;
            let off = amplitude * (std::f64::consts::PI * t).sin().powi(2);
            let base = a.lerp(b, t);
            Point::new(base.x + nx * off, base.y + ny * off)
        })
        .collect()
}

/// Connectivity of an abstract vertex/edge list.
fn connected_with(n: usize, edges: &[(usize, usize)], skip: usize) -> bool {
    let mut adj = vec![Vec::new(); n];
    for (i, &(a, b)) in edges.iter().enumerate() {
        if i == skip {
            continue;
        }
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut count = 1;
    while let Some(v) = stack.pop() {
        for &u in &adj[v] {
            if !seen[u] {
                seen[u] = true;
                count += 1;
                stack.push(u);
            }
        }
    }
    count == n
}

fn gen_grid(spec: &WorldSpec) -> SpatialGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x6e1d);
    let extent = spec.extent;
    let margin = (0.08 * extent).max(40.0).min(extent / 4.0);
    let span = extent - 2.0 * margin;
    let spacing = rng.random_range(0.11..0.15) * extent;
    let k = ((span / spacing).floor() as usize + 1).max(2);
    let spacing = span / (k - 1) as f64;

    // Jittered crossing positions.
    let mut positions = Vec::with_capacity(k * k);
    for r in 0..k {
        for c in 0..k {
            let jx = rng.random_range(-0.02..0.02) * spacing;
            let jy = rng.random_range(-0.02..0.02) * spacing;
            positions.push(Point::new(
                margin + c as f64 * spacing + jx,
                margin + r as f64 * spacing + jy,
            ));
        }
    }

    // Abstract edges, with a connectivity-preserving random deletion pass.
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for r in 0..k {
        for c in 0..k {
            let v = r * k + c;
            if c + 1 < k {
                edges.push((v, v + 1));
            }
            if r + 1 < k {
                edges.push((v, v + k));
            }
        }
    }
    let deletions = (edges.len() as f64 * 0.12) as usize;
    let mut removed = vec![false; edges.len()];
    for _ in 0..deletions {
        let i = rng.random_range(0..edges.len());
        if removed[i] {
            continue;
        }
        let live: Vec<(usize, usize)> =
            edges.iter().enumerate().filter(|&(j, _)| !removed[j]).map(|(_, &e)| e).collect();
        let pos_in_live = live
            .iter()
            .position(|&e| e == edges[i])
            .expect("edge still live");
        let mut degree = vec![0usize; positions.len()];
        for (j, &(a, b)) in live.iter().enumerate() {
            if j != pos_in_live {
                degree[a] += 1;
                degree[b] += 1;
            }
        }
        let (da, db) = (edges[i].0, edges[i].1);
        if degree[da] >= 2
            && degree[db] >= 2
            && live.len() - 1 >= positions.len()
            && connected_with(positions.len(), &live, pos_in_live)
        {
            removed[i] = true;
        }
    }

    // Materialize: some edges curve.
    let mut g = SpatialGraph::new();
    for &p in &positions {
        g.add_vertex(p);
    }
    for (i, &(a, b)) in edges.iter().enumerate() {
        if removed[i] {
            continue;
        }
        if rng.random_range(0.0..1.0) < 0.35 {
            let amp = rng.random_range(0.02..0.06) * spacing;
            let side = if rng.random_range(0..2) == 0 { 1.0 } else { -1.0 };
            let pts = curved_points(g.position(a), g.position(b), side * amp, 4);
            let last = extend_polyline(&mut g, a, &pts);
            g.add_edge(last, b);
        } else {
            g.add_edge(a, b);
        }
    }

    fillet_corners(&mut g, 18.0);
    let stub_count = rng.random_range(2..=4);
    add_stubs(&mut g, spec, &mut rng, stub_count);
    g
}

/// Replace sharp degree-2 corners with short arcs (quadratic blend through
/// the apex). Thinned skeletons round corners by a sizable fraction of the
/// road width; curving the ground truth the same way keeps the two
/// comparable — and square-cut road corners aren't how streets look
/// anyway.
fn fillet_corners(g: &mut SpatialGraph, reach: f64) {
    loop {
        let mut target: Option<(VertexId, VertexId, VertexId)> = None;
        for v in 0..g.vertex_count() {
            if g.degree(v) != 2 {
                continue;
            }
            let n = g.neighbors(v);
            let (a, b) = (n[0].min(n[1]), n[0].max(n[1]));
            let pv = g.position(v);
            let turn = std::f64::consts::PI
                - crate::geom::angle_difference(pv.bearing_to(g.position(a)), pv.bearing_to(g.position(b)));
            if turn > 0.5
                && g.edge_length(v, a) > reach + 1.0
                && g.edge_length(v, b) > reach + 1.0
            {
                target = Some((v, a, b));
                break;
            }
        }
        let Some((v, a, b)) = target else { break };
        let pv = g.position(v);
        let pa = g.position(a);
        let pb = g.position(b);
        let p1 = pv.offset(pv.bearing_to(pa), reach);
        let p2 = pv.offset(pv.bearing_to(pb), reach);
        // Quadratic blend p1 -> apex -> p2.
        let bez = |t: f64| {
            let u = 1.0 - t;
            Point::new(
                u * u * p1.x + 2.0 * u * t * pv.x + t * t * p2.x,
                u * u * p1.y + 2.0 * u * t * pv.y + t * t * p2.y,
            )
        };
        let mut rebuilt = SpatialGraph::new();
        let mut map = vec![usize::MAX; g.vertex_count()];
        for x in 0..g.vertex_count() {
            if x != v {
                map[x] = rebuilt.add_vertex(g.position(x));
            }
        }
        for &(ea, eb) in g.edges() {
            if ea != v && eb != v {
                rebuilt.add_edge(map[ea], map[eb]);
            }
        }
        let arc: Vec<Point> =
            [0.0, 0.25, 0.5, 0.75, 1.0].iter().map(|&t| bez(t)).collect();
        let last = extend_polyline(&mut rebuilt, map[a], &arc);
        rebuilt.add_edge(last, map[b]);
        *g = rebuilt;
    }
}

fn gen_radial(spec: &WorldSpec) -> SpatialGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x4ad1);
    let extent = spec.extent;
    let center = Point::new(
        extent / 2.0 + rng.random_range(-0.04..0.04) * extent,
        extent / 2.0 + rng.random_range(-0.04..0.04) * extent,
    );
    let max_radius = extent / 2.0 - (0.08 * extent).max(40.0);
    let n_rings = if extent >= 800.0 { 3 } else { 2 };
    let mut radii = Vec::new();
    let mut r = rng.random_range(0.16..0.2) * extent;
    for _ in 0..n_rings {
        if r > max_radius {
            break;
        }
        radii.push(r);
        r += rng.random_range(0.14..0.2) * extent;
    }
    let n_spokes = rng.random_range(5..=7);
    let angles: Vec<f64> = (0..n_spokes)
        .map(|j| TAU * j as f64 / n_spokes as f64 + rng.random_range(-0.1..0.1))
        .collect();

    let mut g = SpatialGraph::new();
    let hub = g.add_vertex(center);
    // Crossing vertices ring-by-ring.
    let mut crossings: Vec<Vec<VertexId>> = Vec::new();
    for &radius in &radii {
        let ring: Vec<VertexId> = angles
            .iter()
            .map(|&a| g.add_vertex(center.offset(a, radius)))
            .collect();
        crossings.push(ring);
    }

    // Spokes: hub to first ring, then ring to ring, slightly curved.
    for j in 0..n_spokes {
        let mut from = hub;
        for ring in &crossings {
            let to = ring[j];
            let amp = rng.random_range(0.0..0.05) * extent / 4.0;
            let side = if rng.random_range(0..2) == 0 { 1.0 } else { -1.0 };
            let pts = curved_points(g.position(from), g.position(to), side * amp, 3);
            let last = extend_polyline(&mut g, from, &pts);
            g.add_edge(last, to);
            from = to;
        }
        // Some spokes continue outward into dead ends.
        if rng.random_range(0.0..1.0) < 0.5 {
            let a = angles[j];
            let tail: f64 = rng.random_range(40.0..80.0);
            let from_pos = g.position(from);
            let out_end = from_pos.offset(a, tail.min(extent / 2.0 - 10.0));
            if spec.bbox().contains(out_end) {
                let pts = [from_pos.lerp(out_end, 0.5), out_end];
                extend_polyline(&mut g, from, &pts);
            }
        }
    }

    // Ring arcs between consecutive spokes, as circular polylines; a few
    // arcs drop out (connectivity is guaranteed by the spokes).
    for (ri, ring) in crossings.iter().enumerate() {
        for j in 0..n_spokes {
            if rng.random_range(0.0..1.0) < 0.15 {
                continue;
            }
            let a0 = angles[j];
            let mut a1 = angles[(j + 1) % n_spokes];
            if a1 <= a0 {
                a1 += TAU;
            }
            let arc_len = radii[ri] * (a1 - a0);
            let steps = (arc_len / 25.0).ceil().max(2.0) as usize;
            let pts: Vec<Point> = (1..steps)
                .map(|s| center.offset(a0 + (a1 - a0) * s as f64 / steps as f64, radii[ri]))
                .collect();
            let last = extend_polyline(&mut g, ring[j], &pts);
            g.add_edge(last, ring[(j + 1) % n_spokes]);
        }
    }
    g
}

fn gen_organic(spec: &WorldSpec) -> SpatialGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x0f9a);
    let extent = spec.extent;
    let margin = (0.06 * extent).max(30.0);
    let target_length = 8.0 * extent;

    let mut g = SpatialGraph::new();
    let start = g.add_vertex(Point::new(
        extent / 2.0 + rng.random_range(-0.1..0.1) * extent,
        extent / 2.0 + rng.random_range(-0.1..0.1) * extent,
    ));
    let first_heading = rng.random_range(0.0..TAU);
    let mut tips: Vec<(VertexId, f64)> = vec![(start, first_heading), (start, first_heading + std::f64::consts::PI)];
    let mut total = 0.0;

    for _ in 0..20_000 {
        if total >= target_length {
            break;
        }
        if tips.is_empty() {
            let v = rng.random_range(0..g.vertex_count());
            tips.push((v, rng.random_range(0.0..TAU)));
        }
        let t = rng.random_range(0..tips.len());
        let (tip, heading) = tips[t];
        let step = rng.random_range(18.0..30.0);
        let turn = rng.random_range(-0.3..0.3)
            + if rng.random_range(0.0..1.0) < 0.08 { rng.random_range(-0.9..0.9) } else { 0.0 };
        let new_heading = heading + turn;
        let from = g.position(tip);
        let to = from.offset(new_heading, step);

        if to.x < margin || to.y < margin || to.x > extent - margin || to.y > extent - margin {
            // Steer back toward the middle instead of stepping out.
            let back = from.bearing_to(Point::new(extent / 2.0, extent / 2.0));
            tips[t].1 = back + rng.random_range(-0.3..0.3);
            continue;
        }

        // Join nearby far-by-graph geometry: this is what creates cycles.
        let near: Option<VertexId> = (0..g.vertex_count())
            .filter(|&v| v != tip && g.position(v).distance(to) <= 16.0)
            .find(|&v| {
                matches!(
                    bounded_graph_distance(&g, tip, v, 120.0),
                    GraphDistance::Exceeds
                )
            });
        if let Some(v) = near {
            if !g.has_edge(tip, v) && !crosses_any(&g, from, g.position(v)) {
                total += from.distance(g.position(v));
                g.add_edge(tip, v);
            }
            tips.swap_remove(t);
            continue;
        }

        if crosses_any(&g, from, to) || clearance(&g, from, to, step + 1.0) < 10.0 {
            tips.swap_remove(t);
            continue;
        }

        let v = g.add_vertex(to);
        g.add_edge(tip, v);
        total += step;
        tips[t] = (v, new_heading);

        if rng.random_range(0.0..1.0) < 0.07 {
            let side = if rng.random_range(0..2) == 0 { 1.0 } else { -1.0 };
            let branch_heading = new_heading + side * rng.random_range(1.1..2.0);
            tips.push((v, branch_heading));
        }
        if rng.random_range(0.0..1.0) < 0.03 {
            tips.swap_remove(t);
        }
    }

    ensure_cycle(&mut g, spec);
    trim_blocked_dead_ends(&mut g);
    g
}

/// Retract dead-end chains whose forward runway passes close to unrelated
/// roads: growth kills tips for clearance reasons wherever they stop, and
/// a tip aimed at a nearby road would later bait gap-bridging heuristics
/// into inventing a connection that the ground truth never had.
fn trim_blocked_dead_ends(g: &mut SpatialGraph) {
    loop {
        let mut blocked: Option<VertexId> = None;
        for v in 0..g.vertex_count() {
            if g.degree(v) != 1 {
                continue;
            }
            let u = g.neighbors(v)[0];
            let from = g.position(u);
            let at = g.position(v);
            let len = from.distance(at);
            if len == 0.0 {
                continue;
            }
            let heading = from.bearing_to(at);
            let runway_end = at.offset(heading, 30.0);
            if clearance(g, at.lerp(runway_end, 0.1), runway_end, len.min(12.0)) < 14.0 {
                blocked = Some(v);
                break;
            }
        }
        let Some(v) = blocked else { break };
        let mut rebuilt = SpatialGraph::new();
        let mut map = vec![usize::MAX; g.vertex_count()];
        for x in 0..g.vertex_count() {
            if x != v {
                map[x] = rebuilt.add_vertex(g.position(x));
            }
        }
        for &(a, b) in g.edges() {
            if a != v && b != v {
                rebuilt.add_edge(map[a], map[b]);
            }
        }
        *g = rebuilt;
    }
}

/// If the graph is a tree, join the closest compatible far-by-graph vertex
/// pair so at least one cycle exists.
fn ensure_cycle(g: &mut SpatialGraph, spec: &WorldSpec) {
    if spec.extent < 500.0 || g.edge_count() >= g.vertex_count() {
        return;
    }
    let mut candidates: Vec<(f64, VertexId, VertexId)> = Vec::new();
    for a in 0..g.vertex_count() {
        for b in a + 1..g.vertex_count() {
            let d = g.position(a).distance(g.position(b));
            if d <= 80.0 && !g.has_edge(a, b) {
                candidates.push((d, a, b));
            }
        }
    }
    candidates.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap().then((x.1, x.2).cmp(&(y.1, y.2))));
    for (_, a, b) in candidates {
        let far = matches!(bounded_graph_distance(g, a, b, 160.0), GraphDistance::Exceeds);
        if far && !crosses_any(g, g.position(a), g.position(b)) {
            g.add_edge(a, b);
            return;
        }
    }
}

/// Dead-end stubs off existing vertices, crossing-checked.
fn add_stubs(g: &mut SpatialGraph, spec: &WorldSpec, rng: &mut ChaCha8Rng, count: usize) {
    let mut added = 0;
    for _ in 0..count * 12 {
        if added >= count {
            break;
        }
        let v = rng.random_range(0..g.vertex_count());
        let heading = rng.random_range(0.0..TAU);
        let length = rng.random_range(30.0..70.0);
        let from = g.position(v);
        let to = from.offset(heading, length);
        if to.x < 5.0 || to.y < 5.0 || to.x > spec.extent - 5.0 || to.y > spec.extent - 5.0 {
            continue;
        }
        // A stub leaving at a shallow angle to an existing arm fuses with
        // it when rasterized.
        let shallow = g.neighbors(v).iter().any(|&n| {
            crate::geom::angle_difference(from.bearing_to(g.position(n)), heading) < 0.9
        });
        if shallow {
            continue;
        }
        if (0..g.vertex_count()).any(|u| u != v && g.position(u).distance(to) < 25.0) {
            continue;
        }
        // The stub may touch the network only at its anchor; its far
        // portion plus a 30 m runway past the tip must keep clear, so
        // shallow-angle stubs are rejected and dead-end extension
        // heuristics find nothing to falsely connect.
        let runway_end = from.offset(heading, length + 30.0);
        if crosses_any(g, from, runway_end)
            || clearance(g, from.lerp(to, 0.35), runway_end, 0.1) < 14.0
        {
            continue;
        }
        let mid = from.lerp(to, 0.5);
        extend_polyline(g, v, &[mid, to]);
        added += 1;
    }
}

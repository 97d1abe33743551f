//! Heuristic graph refinement, four stages in order: prune short dangling
//! segments, remove small connected components, extend dead-end segments,
//! and merge nearby junctions.

use std::collections::BTreeSet;

use crate::geograph::{connected_components, SpatialGraph, VertexId};
use crate::geom::Point;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineParams {
    /// Dangling chains shorter than this are pruned, meters.
    pub min_segment: f64,
    /// Components whose total edge length is below this are dropped, meters.
    pub min_component: f64,
    /// How far a dead end may reach forward to connect, meters.
    pub extend_dist: f64,
    /// Lateral tolerance for extension hits and the junction-contraction
    /// radius, meters.
    pub junction_merge: f64,
}

impl Default for RefineParams {
    fn default() -> Self {
        RefineParams {
            min_segment: 20.0,
            min_component: 80.0,
            extend_dist: 25.0,
            junction_merge: 15.0,
        }
    }
}

/// Mutable working copy: adjacency sets plus a liveness flag per vertex.
struct Working {
    positions: Vec<Point>,
    adjacency: Vec<BTreeSet<VertexId>>,
    alive: Vec<bool>,
}

impl Working {
    fn from_graph(graph: &SpatialGraph) -> Self {
        Working {
            positions: graph.positions().to_vec(),
            adjacency: (0..graph.vertex_count())
                .map(|v| graph.neighbors(v).iter().copied().collect())
                .collect(),
            alive: vec![true; graph.vertex_count()],
        }
    }

    fn degree(&self, v: VertexId) -> usize {
        self.adjacency[v].len()
    }

    fn remove_vertex(&mut self, v: VertexId) {
        let neighbors: Vec<VertexId> = self.adjacency[v].iter().copied().collect();
        for n in neighbors {
            self.adjacency[n].remove(&v);
        }
        self.adjacency[v].clear();
        self.alive[v] = false;
    }

    fn into_graph(self) -> SpatialGraph {
        let mut out = SpatialGraph::new();
        let mut map = vec![usize::MAX; self.positions.len()];
        for v in 0..self.positions.len() {
            if self.alive[v] {
                map[v] = out.add_vertex(self.positions[v]);
            }
        }
        for v in 0..self.positions.len() {
            for &n in &self.adjacency[v] {
                if v < n {
                    out.add_edge(map[v], map[n]);
                }
            }
        }
        out
    }
}

/// Apply the four refinement stages with `params`.
pub fn refine(graph: &SpatialGraph, params: &RefineParams) -> SpatialGraph {
    let mut w = Working::from_graph(graph);
    prune_short_spurs(&mut w, params.min_segment);
    drop_small_components(&mut w, params.min_component);
    extend_dead_ends(&mut w, params.extend_dist, params.junction_merge);
    merge_nearby_junctions(&mut w, params.junction_merge);
    w.into_graph()
}

/// Stage 1: delete chains running from a degree-1 endpoint to the nearest
/// junction when their arc length is under `min_segment`. Shortest chain
/// first, one at a time, recomputing after every cut: pruning a whisker
/// can dissolve its junction, at which point a longer sibling chain stops
/// being dangling and must not be amputated. Chains ending at another
/// endpoint are whole components, stage 2's business.
fn prune_short_spurs(w: &mut Working, min_segment: f64) {
    loop {
        let n = w.positions.len();
        let mut best: Option<(f64, Vec<VertexId>)> = None;
        for v in 0..n {
            if !w.alive[v] || w.degree(v) != 1 {
                continue;
            }
            let mut chain = vec![v];
            let mut length = 0.0;
            let mut prev = v;
            let mut cur = *w.adjacency[v].iter().next().unwrap();
            loop {
                length += w.positions[prev].distance(w.positions[cur]);
                if w.degree(cur) >= 3 {
                    break;
                }
                if w.degree(cur) == 1 {
                    chain.clear();
                    break;
                }
                chain.push(cur);
                let next = *w.adjacency[cur].iter().find(|&&x| x != prev).unwrap();
                prev = cur;
                cur = next;
            }
            if !chain.is_empty()
                && length < min_segment
                && best.as_ref().is_none_or(|(bl, _)| length < *bl)
            {
                best = Some((length, chain));
            }
        }
        let Some((_, chain)) = best else { break };
        for v in chain {
            w.remove_vertex(v);
        }
    }
}

/// Stage 2: drop connected components whose total edge length is under
/// `min_component` (isolated vertices count as zero length).
fn drop_small_components(w: &mut Working, min_component: f64) {
    let snapshot = w.clone_into_graph_ids();
    let labels = connected_components(&snapshot.0);
    let mut lengths = vec![0.0f64; labels.iter().max().map_or(0, |m| m + 1)];
    for &(a, b) in snapshot.0.edges() {
        lengths[labels[a]] += snapshot.0.edge_length(a, b);
    }
    for (dense, &orig) in snapshot.1.iter().enumerate() {
        if lengths[labels[dense]] < min_component {
            w.remove_vertex(orig);
        }
    }
}

impl Working {
    /// Dense snapshot graph plus the original id of each dense vertex.
    fn clone_into_graph_ids(&self) -> (SpatialGraph, Vec<VertexId>) {
        let mut out = SpatialGraph::new();
        let mut originals = Vec::new();
        let mut map = vec![usize::MAX; self.positions.len()];
        for v in 0..self.positions.len() {
            if self.alive[v] {
                map[v] = out.add_vertex(self.positions[v]);
                originals.push(v);
            }
        }
        for v in 0..self.positions.len() {
            for &n in &self.adjacency[v] {
                if v < n && self.alive[v] && self.alive[n] {
                    out.add_edge(map[v], map[n]);
                }
            }
        }
        (out, originals)
    }
}

/// Stage 3: from each dead end, march along the terminal bearing up to
/// `extend_dist`; connect to the first vertex encountered within
/// `lateral` of the ray. Nothing is added when the ray hits nothing.
fn extend_dead_ends(w: &mut Working, extend_dist: f64, lateral: f64) {
    let n = w.positions.len();
    let dead_ends: Vec<VertexId> =
        (0..n).filter(|&v| w.alive[v] && w.degree(v) == 1).collect();
    for v in dead_ends {
        if w.degree(v) != 1 {
            continue; // a previous extension already attached here
        }
        let u = *w.adjacency[v].iter().next().unwrap();
        let from = w.positions[u];
        let at = w.positions[v];
        let len = from.distance(at);
        if len == 0.0 {
            continue;
        }
        let dir = Point::new((at.x - from.x) / len, (at.y - from.y) / len);
        let mut best: Option<(f64, VertexId)> = None;
        for t in 0..n {
            if t == v || t == u || !w.alive[t] {
                continue;
            }
            let rel = Point::new(w.positions[t].x - at.x, w.positions[t].y - at.y);
            let along = rel.x * dir.x + rel.y * dir.y;
            let across = (rel.x * dir.y - rel.y * dir.x).abs();
            if along > 1e-9 && along <= extend_dist && across <= lateral {
                let better = match best {
                    None => true,
                    Some((b_along, b_t)) => along < b_along || (along == b_along && t < b_t),
                };
                if better {
                    best = Some((along, t));
                }
            }
        }
        if let Some((_, t)) = best {
            w.adjacency[v].insert(t);
            w.adjacency[t].insert(v);
        }
    }
}

/// Stage 4: contract pairs of junctions closer than `radius` into their
/// midpoint, closest pairs first, until no such pair remains.
fn merge_nearby_junctions(w: &mut Working, radius: f64) {
    loop {
        let junctions: Vec<VertexId> = (0..w.positions.len())
            .filter(|&v| w.alive[v] && w.degree(v) >= 3)
            .collect();
        let mut best: Option<(f64, VertexId, VertexId)> = None;
        for (i, &a) in junctions.iter().enumerate() {
            for &b in &junctions[i + 1..] {
                let d = w.positions[a].distance(w.positions[b]);
                if d < radius {
                    let better = match best {
                        None => true,
                        Some((bd, ba, bb)) => {
                            d < bd || (d == bd && (a, b) < (ba, bb))
                        }
                    };
                    if better {
                        best = Some((d, a, b));
                    }
                }
            }
        }
        let Some((_, a, b)) = best else { break };
        // Degree-2 connector chains between the pair are junction-blob
        // debris; their interiors go with the merge.
        let mut debris: Vec<VertexId> = Vec::new();
        let starts: Vec<VertexId> = w.adjacency[a].iter().copied().collect();
        for start in starts {
            let mut interior = Vec::new();
            let mut arc = w.positions[a].distance(w.positions[start]);
            let (mut prev, mut cur) = (a, start);
            while w.degree(cur) == 2 && arc <= radius {
                interior.push(cur);
                let next = *w.adjacency[cur].iter().find(|&&x| x != prev).unwrap();
                arc += w.positions[cur].distance(w.positions[next]);
                prev = cur;
                cur = next;
            }
            if cur == b && arc <= radius {
                debris.extend(interior);
            }
        }
        for v in debris {
            w.remove_vertex(v);
        }
        // Absorb b into a at the midpoint.
        w.positions[a] = w.positions[a].lerp(w.positions[b], 0.5);
        let b_neighbors: Vec<VertexId> = w.adjacency[b].iter().copied().collect();
        for nb in b_neighbors {
            w.adjacency[nb].remove(&b);
            if nb != a {
                w.adjacency[nb].insert(a);
                w.adjacency[a].insert(nb);
            }
        }
        w.adjacency[b].clear();
        w.adjacency[a].remove(&b);
        w.alive[b] = false;
        // Contraction debris: stranded one-edge stumps hugging the merged
        // junction.
        let stumps: Vec<VertexId> = w.adjacency[a]
            .iter()
            .copied()
            .filter(|&n| {
                w.degree(n) == 1 && w.positions[n].distance(w.positions[a]) <= radius
            })
            .collect();
        for v in stumps {
            w.remove_vertex(v);
        }
    }
}

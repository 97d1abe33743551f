//! Junction-by-junction map comparison.
//!
//! Ground-truth and inferred junctions (degree ≥ 3) are paired one-to-one,
//! mutually nearest within a match radius, closest pairs first. For each
//! pair the incident-edge bearings are assigned one-to-one under an
//! angular tolerance; the fraction of ground-truth bearings captured
//! scores recall, the fraction of inferred bearings with no counterpart
//! scores error. Unpaired ground-truth junctions contribute zero recall;
//! unpaired inferred junctions are pure error.

use crate::geograph::{SpatialGraph, VertexId};
use crate::geom::angle_difference;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JunctionParams {
    /// Pairing radius between junctions, meters.
    pub match_radius: f64,
    /// Largest angular difference that still matches two bearings, radians.
    pub angle_tolerance: f64,
    /// Arc length to follow degree-2 chains when measuring an incident
    /// edge's bearing, meters. Smooths away step-length discretization.
    pub bearing_follow: f64,
}

impl Default for JunctionParams {
    fn default() -> Self {
        JunctionParams {
            match_radius: 12.0,
            angle_tolerance: 30.0_f64.to_radians(),
            bearing_follow: 24.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct JunctionPair {
    pub gt: VertexId,
    pub inferred: VertexId,
    pub f_correct: f64,
    pub f_error: f64,
}

#[derive(Debug, Clone)]
pub struct JunctionReport {
    pub f_correct: f64,
    pub f_error: f64,
    pub pairs: Vec<JunctionPair>,
    pub unpaired_gt: usize,
    pub unpaired_inferred: usize,
}

/// Bearing of the edge (junction, first) as seen from the junction,
/// following degree-2 chains up to `max_arc` meters of arc length.
pub fn incident_bearing(
    graph: &SpatialGraph,
    junction: VertexId,
    first: VertexId,
    max_arc: f64,
) -> f64 {
    let origin = graph.position(junction);
    let mut prev = junction;
    let mut cur = first;
    let mut walked = 0.0;
    let endpoint = loop {
        let seg = graph.edge_length(prev, cur);
        if walked + seg >= max_arc {
            let t = (max_arc - walked) / seg;
            break graph.position(prev).lerp(graph.position(cur), t);
        }
        walked += seg;
        if graph.degree(cur) != 2 || cur == junction {
            break graph.position(cur);
        }
        let next = graph
            .neighbors(cur)
            .iter()
            .copied()
            .find(|&v| v != prev)
            .expect("degree-2 vertex continues");
        prev = cur;
        cur = next;
    };
    origin.bearing_to(endpoint)
}

/// Maximum one-to-one assignment between two bearing sets under the
/// angular tolerance (augmenting-path bipartite matching; degrees are
/// tiny).
fn matched_bearings(gt: &[f64], inferred: &[f64], tolerance: f64) -> usize {
    let allowed: Vec<Vec<usize>> = gt
        .iter()
        .map(|&a| {
            inferred
                .iter()
                .enumerate()
                .filter(|(_, &b)| angle_difference(a, b) <= tolerance)
                .map(|(j, _)| j)
                .collect()
        })
        .collect();
    let mut match_of_inferred = vec![usize::MAX; inferred.len()];

    fn augment(
        i: usize,
        allowed: &[Vec<usize>],
        match_of_inferred: &mut [usize],
        visited: &mut [bool],
    ) -> bool {
        for &j in &allowed[i] {
            if visited[j] {
                continue;
            }
            visited[j] = true;
            if match_of_inferred[j] == usize::MAX
                || augment(match_of_inferred[j], allowed, match_of_inferred, visited)
            {
                match_of_inferred[j] = i;
                return true;
            }
        }
        false
    }

    let mut count = 0;
    for i in 0..gt.len() {
        let mut visited = vec![false; inferred.len()];
        if augment(i, &allowed, &mut match_of_inferred, &mut visited) {
            count += 1;
        }
    }
    count
}

pub fn junction_metric(
    gt: &SpatialGraph,
    inferred: &SpatialGraph,
    params: &JunctionParams,
) -> JunctionReport {
    let gt_junctions = gt.junctions();
    let inf_junctions = inferred.junctions();

    // Greedy one-to-one pairing by ascending distance.
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (i, &v) in gt_junctions.iter().enumerate() {
        for (j, &u) in inf_junctions.iter().enumerate() {
            let d = gt.position(v).distance(inferred.position(u));
            if d <= params.match_radius {
                candidates.push((d, i, j));
            }
        }
    }
    candidates.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap()
            .then_with(|| {
                super::position_key(gt.position(gt_junctions[a.1]), gt.position(gt_junctions[b.1]))
            })
            .then_with(|| {
                super::position_key(
                    inferred.position(inf_junctions[a.2]),
                    inferred.position(inf_junctions[b.2]),
                )
            })
    });
    let mut gt_used = vec![false; gt_junctions.len()];
    let mut inf_used = vec![false; inf_junctions.len()];
    let mut pairs = Vec::new();

    for (_, i, j) in candidates {
        if gt_used[i] || inf_used[j] {
            continue;
        }
        gt_used[i] = true;
        inf_used[j] = true;
        let v = gt_junctions[i];
        let u = inf_junctions[j];
        let gt_bearings: Vec<f64> = gt
            .neighbors(v)
            .iter()
            .map(|&n| incident_bearing(gt, v, n, params.bearing_follow))
            .collect();
        let inf_bearings: Vec<f64> = inferred
            .neighbors(u)
            .iter()
            .map(|&n| incident_bearing(inferred, u, n, params.bearing_follow))
            .collect();
        let matched = matched_bearings(&gt_bearings, &inf_bearings, params.angle_tolerance);
        pairs.push(JunctionPair {
            gt: v,
            inferred: u,
            f_correct: matched as f64 / gt_bearings.len() as f64,
            f_error: 1.0 - matched as f64 / inf_bearings.len() as f64,
        });
    }

    let unpaired_gt = gt_used.iter().filter(|&&u| !u).count();
    let unpaired_inferred = inf_used.iter().filter(|&&u| !u).count();
    let n_correct: f64 = pairs.iter().map(|p| p.f_correct).sum();
    let n_error: f64 =
        pairs.iter().map(|p| p.f_error).sum::<f64>() + unpaired_inferred as f64;

    let f_correct = if gt_junctions.is_empty() { 1.0 } else { n_correct / gt_junctions.len() as f64 };
    let f_error = if n_correct + n_error == 0.0 { 0.0 } else { n_error / (n_correct + n_error) };
    JunctionReport { f_correct, f_error, pairs, unpaired_gt, unpaired_inferred }
}

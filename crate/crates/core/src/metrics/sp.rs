//! Shortest-path metric: sample origin-destination pairs on the ground
//! truth, compare path lengths in the inferred map, and classify each pair
//! as Correct (within the similarity fraction), Long, Short, or NoPath.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::exec;
use crate::geograph::{
    connected_components, shortest_path_distance, GridIndex, SpatialGraph, VertexId,
};

use super::{canonical_vertex_order, MetricError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpParams {
    pub n_pairs: usize,
    /// Relative length tolerance; 0.05 means within 5%.
    pub similarity: f64,
    /// Endpoint snapping radius onto the inferred map, meters.
    pub match_radius: f64,
}

impl Default for SpParams {
    fn default() -> Self {
        SpParams { n_pairs: 200, similarity: 0.05, match_radius: 12.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpReport {
    pub correct: f64,
    pub long: f64,
    pub short: f64,
    pub nopath: f64,
    pub pairs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Class {
    Correct,
    Long,
    Short,
    NoPath,
}

pub fn sp_metric(
    gt: &SpatialGraph,
    inferred: &SpatialGraph,
    params: &SpParams,
    seed: u64,
) -> Result<SpReport, MetricError> {
    assert!(params.n_pairs >= 1);
    let components = connected_components(gt);
    let order = canonical_vertex_order(gt);

    // Vertices grouped by component, each group in canonical order.
    let n_components = components.iter().max().map_or(0, |m| m + 1);
    let mut groups: Vec<Vec<VertexId>> = vec![Vec::new(); n_components];
    for &v in &order {
        groups[components[v]].push(v);
    }
    let usable: Vec<&Vec<VertexId>> = groups.iter().filter(|g| g.len() >= 2).collect();
    if usable.is_empty() {
        return Err(MetricError::InsufficientGraph(
            "ground truth has no connected vertex pair".into(),
        ));
    }

    // Sample pairs uniformly over usable vertices: pick an origin from the
    // union, a destination from its component.
    let origin_pool: Vec<VertexId> = usable.iter().flat_map(|g| g.iter().copied()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<(VertexId, VertexId)> = (0..params.n_pairs)
        .map(|_| {
            let o = origin_pool[rng.random_range(0..origin_pool.len())];
            let group = &groups[components[o]];
            loop {
                let d = group[rng.random_range(0..group.len())];
                if d != o {
                    return (o, d);
                }
            }
        })
        .collect();

    let inf_index = if inferred.vertex_count() > 0 {
        Some(GridIndex::build(inferred, params.match_radius.max(1.0)))
    } else {
        None
    };

    let classes: Vec<Class> = exec::map_vec(&pairs, |&(o, d)| {
        let len_gt = shortest_path_distance(gt, o, d)
            .expect("origin and destination share a component");
        let snap = |v: VertexId| {
            inf_index
                .as_ref()
                .and_then(|ix| ix.nearest_within(gt.position(v), params.match_radius))
                .map(|(u, _)| u)
        };
        let (Some(so), Some(sd)) = (snap(o), snap(d)) else {
            return Class::NoPath;
        };
        let Some(len_inf) = shortest_path_distance(inferred, so, sd) else {
            return Class::NoPath;
        };
        if (len_inf - len_gt).abs() <= params.similarity * len_gt {
            Class::Correct
        } else if len_inf < len_gt {
            Class::Short
        } else {
            Class::Long
        }
    });

    let count = |class: Class| classes.iter().filter(|&&c| c == class).count() as f64;
    let n = params.n_pairs as f64;
    Ok(SpReport {
        correct: count(Class::Correct) / n,
        long: count(Class::Long) / n,
        short: count(Class::Short) / n,
        nopath: count(Class::NoPath) / n,
        pairs: params.n_pairs,
    })
}

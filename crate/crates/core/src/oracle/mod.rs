//! Ground-truth-driven decisions and training-label generation.
//!
//! The oracle answers "what should the search do here?" using the ground
//! truth graph G*: it map-matches a short walk through the partial graph
//! onto G* to find where the search head really is, reads off the angles
//! of unexplored roads from that anchor, and keeps a growing set E of
//! already-explored G* edges so finished roads stop attracting walks.

pub mod labels;
mod map_match;
pub mod toy;

pub use labels::{
    dynamic_training_session, generate_static_examples, read_labels, write_labels, LabelRecord,
    SessionStep, TrainingExample,
};
pub use map_match::{edge_key, map_match, EdgeIndex, EdgeKey, MapMatchError, MatchedPath};
pub use toy::{
    loss, loss_grad_wrt_output, pooled_features, train_toy_decider, PooledExample, ToyDecider,
    ToyModel, TrainError,
};

use std::collections::HashSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::geograph::{SpatialGraph, VertexId};
use crate::geom::Point;
use crate::tracer::{
    bucket_of_angle, DecisionContext, DecisionError, DecisionFunction, DecisionOutput,
};

/// Ground truth plus the per-session explored-edge set E.
pub struct OracleState {
    gt: SpatialGraph,
    index: EdgeIndex,
    explored: HashSet<EdgeKey>,
    /// Random-walk length w used to obtain the path for map-matching.
    pub walk_length: usize,
    /// Emission spread of the matcher, meters.
    pub match_sigma: f64,
    /// Step distance D, meters.
    pub step_distance: f64,
}

impl OracleState {
    pub fn new(gt: SpatialGraph, step_distance: f64) -> Self {
        let index = EdgeIndex::build(&gt, (4.0 * step_distance).max(25.0));
        OracleState {
            gt,
            index,
            explored: HashSet::new(),
            walk_length: 10,
            match_sigma: step_distance / 2.0,
            step_distance,
        }
    }

    pub fn gt(&self) -> &SpatialGraph {
        &self.gt
    }

    pub fn explored(&self) -> &HashSet<EdgeKey> {
        &self.explored
    }

    /// Angles of unexplored roads near `anchor`, as seen from the search
    /// head at `s_top`, plus the G* edges walked to measure them.
    ///
    /// Departure points are the anchor's own unexplored incident edges,
    /// plus unexplored edges hanging off junction vertices reachable from
    /// the anchor through explored edges within the step distance — the
    /// anchor rarely lands exactly on a junction vertex, and sibling
    /// branches must still be found when the search pops back to an
    /// intersection. Each departure edge is walked along degree-2 chains
    /// until the total arc length from the anchor reaches the step
    /// distance; a junction, dead end, or explored edge closer than that
    /// ends the walk at the vertex itself. The angle is the bearing from
    /// `s_top` to the stopping point.
    pub fn unexplored_angles(&self, s_top: Point, anchor: VertexId) -> (Vec<f64>, Vec<EdgeKey>) {
        let mut angles = Vec::new();
        let mut traversed = Vec::new();
        let mut taken = std::collections::HashSet::new();

        // Vertices reachable from the anchor over explored edges, with
        // walked arc length, nearest first (small bounded Dijkstra).
        let mut reach: Vec<(f64, VertexId)> = vec![(0.0, anchor)];
        let mut best = std::collections::HashMap::new();
        best.insert(anchor, 0.0);
        let mut queue = std::collections::BinaryHeap::new();
        queue.push((std::cmp::Reverse(0u64), anchor));
        let scale = 1e6;
        while let Some((std::cmp::Reverse(key), v)) = queue.pop() {
            let dist = key as f64 / scale;
            if dist > best[&v] + 1e-12 {
                continue;
            }
            for &n in self.gt.neighbors(v) {
                if !self.explored.contains(&edge_key(v, n)) {
                    continue;
                }
                let nd = dist + self.gt.edge_length(v, n);
                if nd <= self.step_distance
                    && best.get(&n).is_none_or(|&b| nd < b - 1e-12)
                {
                    best.insert(n, nd);
                    reach.push((nd, n));
                    queue.push((std::cmp::Reverse((nd * scale) as u64), n));
                }
            }
        }
        reach.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));

        for (walked_in, u) in reach {
            // Away from the anchor itself, only junctions may sprout
            // departures; mid-chain explored vertices stay silent.
            if u != anchor && self.gt.degree(u) < 3 {
                continue;
            }
            let budget = self.step_distance - walked_in;
            if budget <= 1e-9 {
                continue;
            }
            let mut starts: Vec<VertexId> = self.gt.neighbors(u).to_vec();
            starts.sort_unstable();
            for n in starts {
                let first = edge_key(u, n);
                if self.explored.contains(&first) || !taken.insert(first) {
                    continue;
                }
                let mut prev = u;
                let mut cur = n;
                let mut walked = 0.0;
                let q = loop {
                    let seg = self.gt.edge_length(prev, cur);
                    traversed.push(edge_key(prev, cur));
                    if walked + seg >= budget {
                        let t = (budget - walked) / seg;
                        break self.gt.position(prev).lerp(self.gt.position(cur), t);
                    }
                    walked += seg;
                    if self.gt.degree(cur) != 2 {
                        break self.gt.position(cur);
                    }
                    let next = self
                        .gt
                        .neighbors(cur)
                        .iter()
                        .copied()
                        .find(|&v| v != prev)
                        .expect("degree-2 vertex has another neighbor");
                    if self.explored.contains(&edge_key(cur, next)) {
                        break self.gt.position(cur);
                    }
                    prev = cur;
                    cur = next;
                };
                // A stopping point on top of the head has no usable bearing.
                if s_top.distance(q) > 1e-6 {
                    angles.push(s_top.bearing_to(q));
                }
            }
        }
        traversed.sort_unstable();
        traversed.dedup();
        (angles, traversed)
    }

    /// The full oracle step for the search head: walk, match, read
    /// unexplored angles, update E, and emit the target.
    ///
    /// A failed match (head too far from any ground truth) falls back to a
    /// stop target.
    pub fn oracle_target<R: Rng>(
        &mut self,
        partial: &SpatialGraph,
        head: VertexId,
        angle_buckets: usize,
        rng: &mut R,
    ) -> ((f64, f64), Vec<f64>) {
        let walk = partial.random_walk(head, self.walk_length, rng);
        // The matcher wants a path ENDING at the head.
        let points: Vec<Point> = walk.iter().rev().map(|&v| partial.position(v)).collect();
        let matched = match map_match(
            &self.gt,
            &self.index,
            &points,
            self.match_sigma,
            self.step_distance,
        ) {
            Ok(m) => m,
            Err(_) => return target_vector(&[], angle_buckets),
        };
        // Only matched (p*) edges enter E. Edges merely walked while
        // measuring angles must stay unexplored: they cover the road ~D
        // AHEAD of the anchor, and marking them would stall the search on
        // chains and skip sibling branches at junctions.
        self.explored.extend(matched.edges.iter().copied());
        let s_top = partial.position(head);
        let (r_angles, _walked) = self.unexplored_angles(s_top, matched.anchor);
        target_vector(&r_angles, angle_buckets)
    }
}

/// Convert the unexplored-angle set R into a target: empty R means stop;
/// otherwise walk, with a 1 in the bucket closest to each angle (wrapping,
/// so an angle just under 2π lands in bucket 0).
pub fn target_vector(r_angles: &[f64], angle_buckets: usize) -> ((f64, f64), Vec<f64>) {
    let mut angles = vec![0.0; angle_buckets];
    if r_angles.is_empty() {
        return ((0.0, 1.0), angles);
    }
    for &theta in r_angles {
        angles[bucket_of_angle(theta, angle_buckets)] = 1.0;
    }
    ((1.0, 0.0), angles)
}

/// The oracle packaged as a decision function.
pub struct OracleDecider {
    pub state: OracleState,
    rng: ChaCha8Rng,
}

impl OracleDecider {
    pub fn new(state: OracleState, seed: u64) -> Self {
        use rand::SeedableRng;
        OracleDecider { state, rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl DecisionFunction for OracleDecider {
    fn decide(&mut self, ctx: &mut DecisionContext<'_>) -> Result<DecisionOutput, DecisionError> {
        let ((o_walk, o_stop), angles) = self.state.oracle_target(
            ctx.graph(),
            ctx.head(),
            ctx.config.angle_buckets,
            &mut self.rng,
        );
        Ok(DecisionOutput { o_walk, o_stop, angles })
    }
}
